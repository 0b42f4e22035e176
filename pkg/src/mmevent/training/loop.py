"""Training loop: task losses, substage execution, full-run orchestration.

Frozen parameters are excluded from the optimizer entirely (no state, no
weight decay), so a frozen group is bitwise unchanged across a substage.
All shuffling and sampling is seeded; two runs with the same config and
seed produce identical loss curves and reports.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
from torch import nn

from ..augmentation.batches import AugmentationPool, assemble_text_batch
from ..augmentation.cache import GenerationCache
from ..data_model import ImageDoc, MultimediaDocument, Ontology, Sentence
from ..encoders import to_canonical_box
from ..errors import ConfigError
from ..fusion import FusionContext
from ..heads import extract_object_feature
from ..model import ModelConfig, MultimediaEventModel
from ..seeding import stable_seed
from .checkpoints import load_checkpoint, restore_model, save_checkpoint
from .schedule import OptimizerConfig, StagePlan, Substage, balance_events, build_freeze_mask


@dataclass
class TextExample:
    doc: MultimediaDocument
    sentence: Sentence
    context_paths: tuple[str, ...]  # generated-image payloads; empty when fusion off
    word_labels: tuple[int, ...]
    # (trigger index, entity start, role label) triples for the argument task
    argument_items: tuple[tuple[int, int, int], ...]


@dataclass
class VisualExample:
    image: ImageDoc
    caption_words: tuple[str, ...] | None
    label: int
    # (box, role label) pairs for the argument task
    argument_items: tuple = ()


@dataclass
class TrainResult:
    checkpoints: dict[str, Path]
    bundle_path: Path
    manifest_path: Path
    log_path: Path
    lineage: list[str]
    counters: dict


# ---------------------------------------------------------------------------
# example construction


def build_text_examples(
    text_docs: list[MultimediaDocument],
    labels,
    pool: Optional[AugmentationPool],
    neg_k: int,
    seed: int,
) -> list[TextExample]:
    examples = []
    for doc in text_docs:
        events = [
            (k, e) for k, e in enumerate(doc.gold_events) if e.text_trigger is not None
        ]
        for sentence in doc.sentences:
            word_labels = [0] * len(sentence.words)
            argument_items: list[tuple[int, int, int]] = []
            for _, event in events:
                if event.text_trigger[0] != sentence.id:
                    continue
                trig_idx = event.text_trigger[1]
                word_labels[trig_idx] = labels.type_to_idx.get(event.event_type, 0)
                span_to_role = {
                    (a.text_grounding[1], a.text_grounding[2]): a.role
                    for a in event.arguments
                    if a.text_grounding is not None
                    and a.text_grounding[0] == sentence.id
                }
                for ent in sentence.entities:
                    role = span_to_role.get((ent.start, ent.end))
                    argument_items.append(
                        (trig_idx, ent.start, labels.role_to_idx.get(role, 0))
                    )
            context_paths: tuple[str, ...] = ()
            if pool is not None:
                ctx = assemble_text_batch(doc, sentence, pool, neg_k, seed)
                context_paths = ctx.positives + ctx.negatives
            examples.append(
                TextExample(
                    doc=doc,
                    sentence=sentence,
                    context_paths=context_paths,
                    word_labels=tuple(word_labels),
                    argument_items=tuple(argument_items),
                )
            )
    return examples


def build_visual_examples(
    image_docs: list[MultimediaDocument],
    labels,
    pool: Optional[AugmentationPool],
) -> list[VisualExample]:
    examples = []
    for doc in image_docs:
        events_by_image: dict[str, list] = {}
        for event in doc.gold_events:
            if event.image_trigger is not None:
                events_by_image.setdefault(event.image_trigger, []).append(event)
        for image in doc.images:
            events = events_by_image.get(image.id, [])
            label = labels.type_to_idx.get(events[0].event_type, 0) if events else 0
            argument_items = []
            for event in events:
                for arg in event.arguments:
                    for image_id, box in arg.visual_grounding:
                        if image_id == image.id:
                            argument_items.append(
                                (box, labels.role_to_idx.get(arg.role, 0))
                            )
            caption_words = None
            if pool is not None:
                captions = pool.captions_by_image.get(image.id)
                if not captions:
                    raise ConfigError(
                        f"no generated caption for image {image.id!r}; "
                        f"run `mmevent augment --direction img2txt` first"
                    )
                caption_words = tuple(captions[0].split())
            examples.append(
                VisualExample(
                    image=image,
                    caption_words=caption_words,
                    label=label,
                    argument_items=tuple(argument_items),
                )
            )
    return examples


# ---------------------------------------------------------------------------
# batch losses


def _image_context(model, paths: tuple[str, ...]) -> Optional[FusionContext]:
    if model.fusion is None:
        return None
    if not paths:
        # A sentence can only be fused against something; fall back to a
        # zero row so the forward stays well-defined.
        zero = torch.zeros(1, model.cfg.d, dtype=model.heads.layers["text-mention"].weight.dtype)
        return FusionContext(keys_values=zero)
    cls_rows = []
    for path in paths:
        pseudo = ImageDoc(
            id=path,
            source=path,
            width=model.cfg.canonical_size,
            height=model.cfg.canonical_size,
        )
        cls_rows.append(model.encode_image(pseudo).cls)
    return FusionContext(keys_values=torch.stack(cls_rows), source_ids=tuple(paths))


def _caption_context(model, batch: list[VisualExample]) -> Optional[FusionContext]:
    if model.fusion is None:
        return None
    rows = []
    ids = []
    for ex in batch:
        words = ex.caption_words or ("<none>",)
        sentence = Sentence(id=f"caption:{ex.image.id}", words=words)
        rows.append(model.encode_sentence(sentence).cls)
        ids.append(sentence.id)
    return FusionContext(keys_values=torch.stack(rows), source_ids=tuple(ids))


def compute_batch_loss(model: MultimediaEventModel, task: str, batch: list) -> torch.Tensor:
    if task == "visual-mention":
        ctx = _caption_context(model, batch)
        cls_rows = torch.stack([model.encode_image(ex.image).cls for ex in batch])
        if model.fusion is None:
            x = cls_rows
        else:
            x = torch.cat([cls_rows, model.fusion(cls_rows, ctx, task)], dim=-1)
        logits = model.heads.head(task)(x)
        targets = torch.tensor([ex.label for ex in batch], dtype=torch.long)
        return nn.functional.cross_entropy(logits, targets)

    if task == "visual-argument":
        ctx = _caption_context(model, batch)
        feats, cls_list, targets = [], [], []
        for ex in batch:
            if not ex.argument_items:
                continue
            enc = model.encode_image(ex.image)
            for box, role_idx in ex.argument_items:
                canon = to_canonical_box(
                    box, ex.image.width, ex.image.height, model.cfg.canonical_size
                )
                obj = extract_object_feature(canon, enc, model.cfg.canonical_size)
                feats.append(obj.vector)
                cls_list.append(enc.cls)
                targets.append(role_idx)
        if not feats:
            return torch.zeros((), dtype=model.heads.layers[task].weight.dtype)
        h_obj = torch.stack(feats)
        h_cls = torch.stack(cls_list)
        if model.fusion is None:
            x = torch.cat([h_obj, h_cls], dim=-1)
        else:
            x = torch.cat([h_obj, model.fusion(h_obj, ctx, task), h_cls], dim=-1)
        logits = model.heads.head(task)(x)
        return nn.functional.cross_entropy(logits, torch.tensor(targets, dtype=torch.long))

    if task == "text-mention":
        total = None
        count = 0
        for ex in batch:
            enc = model.encode_sentence(ex.sentence)
            ctx = _image_context(model, ex.context_paths)
            h = enc.tokens[list(enc.word_map)]
            if model.fusion is None:
                x = h
            else:
                x = torch.cat([h, model.fusion(h, ctx, task)], dim=-1)
            logits = model.heads.head(task)(x)
            targets = torch.tensor(ex.word_labels[: h.shape[0]], dtype=torch.long)
            loss = nn.functional.cross_entropy(logits, targets, reduction="sum")
            total = loss if total is None else total + loss
            count += int(targets.shape[0])
        if total is None:
            return torch.zeros(())
        return total / count

    if task == "text-argument":
        ents, trigs, ctxs, targets = [], [], [], []
        for ex in batch:
            if not ex.argument_items:
                continue
            enc = model.encode_sentence(ex.sentence)
            ctx = _image_context(model, ex.context_paths)
            for trig_idx, ent_start, role_idx in ex.argument_items:
                h_ent = enc.tokens[enc.word_map[ent_start]]
                h_trig = enc.tokens[enc.word_map[trig_idx]]
                if model.fusion is None:
                    x = torch.cat([h_ent, h_trig])
                else:
                    x = torch.cat([h_ent, model.fusion(h_ent, ctx, task), h_trig])
                ents.append(x)
                targets.append(role_idx)
        if not ents:
            return torch.zeros(())
        logits = model.heads.head(task)(torch.stack(ents))
        return nn.functional.cross_entropy(logits, torch.tensor(targets, dtype=torch.long))

    raise ConfigError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# substage execution


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Cosine decay from base_lr at step 0 toward 0 at step == total_steps."""
    if total_steps <= 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(step, total_steps) / total_steps))


def run_substage(
    model: MultimediaEventModel,
    substage: Substage,
    examples_by_task: dict[str, list],
    opt_cfg: OptimizerConfig,
    log_fh=None,
    checkpoint_path: Optional[Path] = None,
    lineage: Optional[list[str]] = None,
    config_snapshot: Optional[dict] = None,
    config_hash: str = "",
) -> dict:
    """Train one substage; returns summary stats and writes the log."""
    groups = model.parameter_groups()
    mask = build_freeze_mask(substage.freeze, groups)
    named = {name: p for params in groups.values() for name, p in params.items()}
    for name, p in named.items():
        p.requires_grad_(mask[name])
    trainable = [p for name, p in named.items() if mask[name]]
    if not trainable:
        raise ConfigError(f"substage {substage.name!r} has no trainable parameters")

    optimizer = torch.optim.AdamW(
        trainable, lr=opt_cfg.lr, weight_decay=opt_cfg.weight_decay
    )

    stream: list[tuple[str, object]] = []
    for task in substage.tasks:
        task_examples = examples_by_task[task]
        if substage.resampler == "balanced":
            task_examples = balance_events(
                task_examples, seed=stable_seed(opt_cfg.seed, substage.name),
                label_of=lambda ex: getattr(ex, "label", 0),
            )
        stream.extend((task, ex) for ex in task_examples)
    if not stream:
        raise ConfigError(f"substage {substage.name!r} has no training data")

    batch_size = opt_cfg.batch_size(substage.dataset)
    steps_per_epoch = math.ceil(len(stream) / batch_size)
    total_steps = substage.epochs * steps_per_epoch

    step = 0
    last_loss = float("nan")
    for epoch in range(substage.epochs):
        rng = np.random.default_rng(stable_seed("order", opt_cfg.seed, substage.name, epoch))
        order = rng.permutation(len(stream))
        for b in range(steps_per_epoch):
            batch_idx = order[b * batch_size : (b + 1) * batch_size]
            by_task: dict[str, list] = {}
            for i in batch_idx:
                task, ex = stream[int(i)]
                by_task.setdefault(task, []).append(ex)

            lr = cosine_lr(opt_cfg.lr, step, total_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr

            loss = None
            for task, batch in by_task.items():
                task_loss = compute_batch_loss(model, task, batch)
                loss = task_loss if loss is None else loss + task_loss
            if not torch.isfinite(loss):
                if checkpoint_path is not None:
                    save_checkpoint(
                        checkpoint_path.with_suffix(".diagnostic.pt"),
                        model,
                        lineage=(lineage or []) + [substage.name + ":aborted"],
                        config_snapshot=config_snapshot or {},
                        config_hash=config_hash,
                    )
                raise RuntimeError(
                    f"non-finite loss at step {step} of {substage.name}"
                )

            optimizer.zero_grad()
            loss.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(trainable, opt_cfg.grad_clip)
            optimizer.step()

            last_loss = float(loss.detach())
            if log_fh is not None:
                log_fh.write(
                    json.dumps(
                        {
                            "step": step,
                            "substage": substage.name,
                            "loss": last_loss,
                            "lr": lr,
                            "grad_norm": float(grad_norm),
                        }
                    )
                    + "\n"
                )
            step += 1

    ckpt = None
    if checkpoint_path is not None:
        ckpt = save_checkpoint(
            checkpoint_path,
            model,
            lineage=(lineage or []) + [substage.name],
            config_snapshot=config_snapshot or {},
            config_hash=config_hash,
            optimizer_state=None,
            metrics={"final_loss": last_loss},
        )
    return {
        "substage": substage.name,
        "steps": step,
        "final_loss": last_loss,
        "checkpoint": str(ckpt) if ckpt else None,
        "examples": len(stream),
    }


# ---------------------------------------------------------------------------
# full run


def train_run(
    *,
    model_cfg: ModelConfig,
    ontology: Ontology,
    text_docs: list[MultimediaDocument],
    image_docs: list[MultimediaDocument],
    plans: list[StagePlan],
    opt_cfg: OptimizerConfig,
    out_dir: str | Path,
    config_snapshot: dict,
    config_hash: str,
    use_augmentation: bool = True,
    cache: Optional[GenerationCache] = None,
    neg_k: int = 4,
    ablation: Optional[str] = None,
    init_checkpoint: Optional[str | Path] = None,
    on_substage: Optional[Callable] = None,
) -> TrainResult:
    """Execute a full (possibly ablated) training schedule."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"

    pool = None
    if use_augmentation:
        if cache is None:
            raise ConfigError("augmented training requires a generation cache")
        pool = AugmentationPool.from_cache(cache)
        has_text_events = any(
            e.text_trigger is not None for d in text_docs for e in d.gold_events
        )
        if has_text_events and not pool.images_by_event:
            raise ConfigError(
                "generation cache has no images; run `mmevent augment "
                "--direction text2img` before training"
            )
        if image_docs and not pool.captions_by_image:
            raise ConfigError(
                "generation cache has no captions; run `mmevent augment "
                "--direction img2txt` before training"
            )

    model = MultimediaEventModel(model_cfg, ontology)
    lineage: list[str] = []
    if init_checkpoint is not None:
        payload = load_checkpoint(init_checkpoint)
        restore_model(model, payload)
        lineage = list(payload["lineage"])
    labels = model.labels
    examples_by_task = {
        "text-mention": build_text_examples(text_docs, labels, pool, neg_k, opt_cfg.seed),
        "visual-mention": build_visual_examples(image_docs, labels, pool),
    }
    examples_by_task["text-argument"] = examples_by_task["text-mention"]
    examples_by_task["visual-argument"] = examples_by_task["visual-mention"]

    checkpoints: dict[str, Path] = {}
    summaries = []
    with open(log_path, "w", encoding="utf-8") as log_fh:
        for plan in plans:
            for substage in plan.substages:
                if substage.branch_from is not None:
                    source = checkpoints.get(substage.branch_from)
                    if source is None and init_checkpoint is not None:
                        source = Path(init_checkpoint)
                    if source is None:
                        raise ConfigError(
                            f"substage {substage.name!r} branches from "
                            f"{substage.branch_from!r} which has not run"
                        )
                    payload = load_checkpoint(source)
                    restore_model(model, payload)
                    lineage = list(payload["lineage"])
                if on_substage is not None:
                    on_substage(model, substage, "before")
                summary = run_substage(
                    model,
                    substage,
                    examples_by_task,
                    opt_cfg,
                    log_fh=log_fh,
                    checkpoint_path=out_dir / "checkpoints" / f"{substage.name}.pt",
                    lineage=lineage,
                    config_snapshot=config_snapshot,
                    config_hash=config_hash,
                )
                if on_substage is not None:
                    on_substage(model, substage, "after")
                lineage = lineage + [substage.name]
                checkpoints[substage.name] = Path(summary["checkpoint"])
                summaries.append(summary)

    # Mention predictions come from the last non-branching checkpoint; the
    # two stage-4 branches specialize the argument tasks.
    non_branch = [s.name for p in plans for s in p.substages if s.branch_from is None]
    mention_ckpt = checkpoints[non_branch[-1]]
    text_arg_ckpt = next(
        (checkpoints[s.name] for p in plans for s in p.substages
         if "text-argument" in s.tasks), mention_ckpt,
    )
    visual_arg_ckpt = next(
        (checkpoints[s.name] for p in plans for s in p.substages
         if "visual-argument" in s.tasks), mention_ckpt,
    )
    bundle = {
        "mention": str(mention_ckpt),
        "text_argument": str(text_arg_ckpt),
        "visual_argument": str(visual_arg_ckpt),
    }
    bundle_dir = out_dir / "final"
    bundle_dir.mkdir(parents=True, exist_ok=True)
    bundle_path = bundle_dir / "bundle.json"
    bundle_path.write_text(json.dumps(bundle, indent=2), encoding="utf-8")

    counters = {
        "cache_reads": cache.reads if cache is not None else 0,
        "cache_writes": cache.writes if cache is not None else 0,
    }
    manifest = {
        "kind": "train",
        "ablation": ablation,
        "config_hash": config_hash,
        "fusion_mode": model_cfg.fusion_mode,
        "use_augmentation": use_augmentation,
        "stage_count": len(plans),
        "substages": [s["substage"] for s in summaries],
        "lineage_per_checkpoint": {
            name: load_checkpoint(path)["lineage"] for name, path in checkpoints.items()
        },
        "counters": counters,
        "summaries": summaries,
        "bundle": bundle,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")

    return TrainResult(
        checkpoints=checkpoints,
        bundle_path=bundle_path,
        manifest_path=manifest_path,
        log_path=log_path,
        lineage=[s["substage"] for s in summaries],
        counters=counters,
    )
