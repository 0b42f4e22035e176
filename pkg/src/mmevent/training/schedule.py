"""The gradual training schedule and its freeze policies.

Four stages:

1. one-modality rounds with the generated-modality encoder frozen
   (visual mentions 10 epochs with the text encoder frozen, then textual
   mentions 5 epochs with the image encoder frozen);
2. the same two rounds for one epoch each with both encoders frozen, so
   each modality's classifiers adapt to the other encoder's stage-1 drift;
3. one epoch of the visual mention classifier alone on class-balanced
   data, everything else frozen;
4. two branches off the stage-3 checkpoint, one per argument task, with
   the matching encoder unfrozen — yielding two argument-specialized
   checkpoints.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError
from ..fusion import TASKS
from ..seeding import stable_seed

GROUP_NAMES = (
    "text_encoder",
    "image_encoder",
    "adapter_shared",
    *(f"adapter_task.{t}" for t in TASKS),
    *(f"head.{t}" for t in TASKS),
)


@dataclass(frozen=True)
class FreezePolicy:
    frozen: frozenset[str] = frozenset()

    def __post_init__(self):
        unknown = self.frozen - set(GROUP_NAMES)
        if unknown:
            raise ConfigError(f"unknown parameter groups in freeze policy: {sorted(unknown)}")


def _all_but(*trainable: str) -> frozenset[str]:
    return frozenset(GROUP_NAMES) - set(trainable)


@dataclass(frozen=True)
class Substage:
    name: str
    stage: int
    tasks: tuple[str, ...]
    dataset: str  # "image" | "text" | "merged"
    epochs: int
    freeze: FreezePolicy
    resampler: str = "none"  # "none" | "balanced"
    branch_from: str | None = None  # substage whose checkpoint seeds this one

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("substage epochs must be >= 1")
        for task in self.tasks:
            if task not in TASKS:
                raise ConfigError(f"unknown task {task!r}")


@dataclass(frozen=True)
class StagePlan:
    stage: int
    substages: tuple[Substage, ...]


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-4
    weight_decay: float = 1e-2
    batch_size_visual: int = 64
    batch_size_text: int = 10
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size_visual <= 0 or self.batch_size_text <= 0:
            raise ConfigError("optimizer rates and batch sizes must be positive")

    def batch_size(self, dataset: str) -> int:
        return self.batch_size_visual if dataset == "image" else self.batch_size_text


def default_schedule(
    stage2_repeats: int = 1,
    visual_mention_epochs: int = 10,
    text_mention_epochs: int = 5,
) -> list[StagePlan]:
    """The full gradual schedule; epoch counts are the published defaults."""
    stage1 = StagePlan(
        stage=1,
        substages=(
            Substage(
                name="stage1.visual-mention",
                stage=1,
                tasks=("visual-mention",),
                dataset="image",
                epochs=visual_mention_epochs,
                freeze=FreezePolicy(frozenset({"text_encoder"})),
            ),
            Substage(
                name="stage1.text-mention",
                stage=1,
                tasks=("text-mention",),
                dataset="text",
                epochs=text_mention_epochs,
                freeze=FreezePolicy(frozenset({"image_encoder"})),
            ),
        ),
    )
    stage2_subs = []
    for r in range(stage2_repeats):
        suffix = "" if stage2_repeats == 1 else f".r{r}"
        stage2_subs.extend(
            [
                Substage(
                    name=f"stage2.visual-mention{suffix}",
                    stage=2,
                    tasks=("visual-mention",),
                    dataset="image",
                    epochs=1,
                    freeze=FreezePolicy(frozenset({"text_encoder", "image_encoder"})),
                ),
                Substage(
                    name=f"stage2.text-mention{suffix}",
                    stage=2,
                    tasks=("text-mention",),
                    dataset="text",
                    epochs=1,
                    freeze=FreezePolicy(frozenset({"text_encoder", "image_encoder"})),
                ),
            ]
        )
    stage2 = StagePlan(stage=2, substages=tuple(stage2_subs))
    stage3 = StagePlan(
        stage=3,
        substages=(
            Substage(
                name="stage3.visual-mention-balanced",
                stage=3,
                tasks=("visual-mention",),
                dataset="image",
                epochs=1,
                freeze=FreezePolicy(_all_but("head.visual-mention")),
                resampler="balanced",
            ),
        ),
    )
    stage4 = StagePlan(
        stage=4,
        substages=(
            Substage(
                name="stage4.visual-argument",
                stage=4,
                tasks=("visual-argument",),
                dataset="image",
                epochs=1,
                freeze=FreezePolicy(frozenset({"text_encoder"})),
                branch_from="stage3.visual-mention-balanced",
            ),
            Substage(
                name="stage4.text-argument",
                stage=4,
                tasks=("text-argument",),
                dataset="text",
                epochs=1,
                freeze=FreezePolicy(frozenset({"image_encoder"})),
                branch_from="stage3.visual-mention-balanced",
            ),
        ),
    )
    return [stage1, stage2, stage3, stage4]


def plans_to_dict(plans: list[StagePlan]) -> list[dict]:
    """Structural form for golden-plan comparison and manifests."""
    return [
        {
            "stage": plan.stage,
            "substages": [
                {
                    "name": s.name,
                    "tasks": list(s.tasks),
                    "dataset": s.dataset,
                    "epochs": s.epochs,
                    "frozen": sorted(s.freeze.frozen),
                    "resampler": s.resampler,
                    "branch_from": s.branch_from,
                }
                for s in plan.substages
            ],
        }
        for plan in plans
    ]


def build_freeze_mask(
    policy: FreezePolicy, groups: dict[str, dict]
) -> dict[str, bool]:
    """Per-parameter trainable flags; False exactly inside frozen groups."""
    unknown = policy.frozen - set(groups)
    if unknown:
        raise ConfigError(f"freeze policy names unknown groups: {sorted(unknown)}")
    mask: dict[str, bool] = {}
    for group, params in groups.items():
        trainable = group not in policy.frozen
        for name in params:
            mask[name] = trainable
    return mask


def balance_events(examples: list, seed: int, label_of=None) -> list:
    """Downsample every class (null included) to the minimum class count.

    Sampling is seeded and without replacement; output order follows the
    input order of the retained examples.
    """
    if not examples:
        raise ContractError("balance_events requires at least one example")
    label_of = label_of or (lambda ex: ex[-1])
    by_class: dict = {}
    for i, ex in enumerate(examples):
        by_class.setdefault(label_of(ex), []).append(i)

    counts = Counter({label: len(idxs) for label, idxs in by_class.items()})
    non_null = [c for label, c in counts.items() if label != 0]
    quota = min(non_null) if non_null else min(counts.values())

    rng = np.random.default_rng(stable_seed("balance", seed))
    keep: set[int] = set()
    for label in sorted(by_class, key=str):
        idxs = by_class[label]
        if len(idxs) <= quota:
            keep.update(idxs)
        else:
            chosen = rng.choice(len(idxs), size=quota, replace=False)
            keep.update(idxs[int(i)] for i in chosen)
    return [ex for i, ex in enumerate(examples) if i in keep]
