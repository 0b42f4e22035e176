from .schedule import (
    FreezePolicy,
    OptimizerConfig,
    StagePlan,
    Substage,
    balance_events,
    build_freeze_mask,
    default_schedule,
    plans_to_dict,
)
from .checkpoints import load_checkpoint, save_checkpoint
from .loop import TrainResult, run_substage, train_run
from .ablations import ABLATION_MODES, ablation_plans

__all__ = [
    "ABLATION_MODES",
    "FreezePolicy",
    "OptimizerConfig",
    "StagePlan",
    "Substage",
    "TrainResult",
    "ablation_plans",
    "balance_events",
    "build_freeze_mask",
    "default_schedule",
    "load_checkpoint",
    "plans_to_dict",
    "run_substage",
    "save_checkpoint",
    "train_run",
]
