"""Ablation configurations mirroring the reduced training regimes.

* combined: one stage, one substage over the merged task set, nothing
  frozen;
* one-round: stage 1 only;
* no-augmentation: full schedule on unimodal data with fusion removed
  (zero generation-cache reads);
* no-adapter: full schedule with cosine-similarity fusion instead of the
  adapter block.
"""

from dataclasses import replace

from ..errors import ConfigError
from ..fusion import TASKS
from ..model import ModelConfig
from .schedule import FreezePolicy, StagePlan, Substage, default_schedule

ABLATION_MODES = ("combined", "one-round", "no-augmentation", "no-adapter")


def ablation_plans(
    mode: str | None,
    stage2_repeats: int = 1,
    combined_epochs: int = 10,
    visual_mention_epochs: int = 10,
    text_mention_epochs: int = 5,
) -> list[StagePlan]:
    full = default_schedule(
        stage2_repeats=stage2_repeats,
        visual_mention_epochs=visual_mention_epochs,
        text_mention_epochs=text_mention_epochs,
    )
    if mode is None or mode in ("no-augmentation", "no-adapter"):
        return full
    if mode == "one-round":
        return full[:1]
    if mode == "combined":
        return [
            StagePlan(
                stage=1,
                substages=(
                    Substage(
                        name="combined.all-tasks",
                        stage=1,
                        tasks=tuple(TASKS),
                        dataset="merged",
                        epochs=combined_epochs,
                        freeze=FreezePolicy(frozenset()),
                    ),
                ),
            )
        ]
    raise ConfigError(f"unknown ablation mode {mode!r}; choose from {ABLATION_MODES}")


def ablation_model_cfg(mode: str | None, cfg: ModelConfig) -> ModelConfig:
    if mode == "no-augmentation":
        return replace(cfg, fusion_mode="none")
    if mode == "no-adapter":
        return replace(cfg, fusion_mode="cosine")
    return cfg


def ablation_uses_augmentation(mode: str | None) -> bool:
    return mode != "no-augmentation"
