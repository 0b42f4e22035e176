"""Command-line entry point: augment, train, predict, eval, sweep, report.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error. One config
file drives everything; `--set section.key=value` overrides are applied
last and recorded in the run manifest.
"""

import functools
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click

from .augmentation.cache import GenerationCache
from .augmentation.pipeline import augment_image_dataset, augment_text_dataset
from .config import RunConfig, load_run_config
from .coref import MergeConfig
from .data_model import (
    load_image_dataset,
    load_multimedia_dataset,
    load_ontology,
    load_text_dataset,
)
from .errors import ConfigError, MmeventError
from .manifest import new_run_dir, write_manifest
from .predict import events_from_prediction, load_bundle, predict_documents
from .reporting import emit_report, write_comparison_files, write_report_files
from .scoring import ScoreReport, score_documents
from .training.ablations import (
    ABLATION_MODES,
    ablation_model_cfg,
    ablation_plans,
    ablation_uses_augmentation,
)
from .training.checkpoints import load_checkpoint
from .training.loop import train_run


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except MmeventError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except RuntimeError as exc:
            click.echo(f"runtime failure: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _config_options(fn):
    fn = click.option("--set", "overrides", multiple=True,
                      help="Override config entries, e.g. --set merge.threshold=0.6")(fn)
    fn = click.option("--run-id", default=None, help="Run directory name under runs/")(fn)
    return fn


@click.group()
def main():
    """Multimedia event extraction pipelines."""


# ---------------------------------------------------------------------------
# augment


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--direction", required=True, type=click.Choice(["text2img", "img2txt"]))
@click.option("--out", "cache_dir", default=None,
              help="Cache directory (defaults to augmentation.cache_dir).")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@_config_options
@_handle_errors
def augment(dataset_path, direction, cache_dir, config_path, overrides, run_id):
    """Generate the missing modality for a unimodal dataset."""
    cfg = load_run_config(config_path, tuple(overrides), run_id)
    ontology = cfg.ontology()
    cache = GenerationCache(cache_dir or cfg.cache_dir)

    if direction == "text2img":
        docs = load_text_dataset(dataset_path, ontology)
        client = cfg.image_generator()
        produced = augment_text_dataset(
            docs, cfg.generation_config(), client, cache, dataset_name=str(dataset_path)
        )
    else:
        docs = load_image_dataset(
            dataset_path, ontology, strict=bool(cfg.data.get("strict_verbs", False))
        )
        client = cfg.captioner()
        produced = augment_image_dataset(
            docs, cfg.nucleus_config(), client, cache, dataset_name=str(dataset_path)
        )

    run_dir = new_run_dir(cfg.runs_dir, cfg.run_id + "-augment-" + direction)
    write_manifest(
        run_dir,
        command="augment",
        config_hash=cfg.config_hash,
        config_snapshot=cfg.snapshot(),
        inputs={"dataset": dataset_path, "ontology": cfg.data_path("ontology")},
        tags={"generator": client.tag, "direction": direction},
        outputs=[cache.root / "manifest.jsonl"] if (cache.root / "manifest.jsonl").exists() else [],
        counters={"pairs": produced, "cache_reads": cache.reads, "cache_writes": cache.writes},
    )
    click.echo(f"augment {direction}: {produced} generated pairs in {cache.root}")


# ---------------------------------------------------------------------------
# train


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--ablation", type=click.Choice(ABLATION_MODES), default=None)
@click.option("--stage", type=int, default=None, help="Run a single stage (needs --init for N>1).")
@click.option("--init", "init_checkpoint", type=click.Path(exists=True), default=None)
@_config_options
@_handle_errors
def train(config_path, ablation, stage, init_checkpoint, overrides, run_id):
    """Execute the gradual training schedule (or an ablation of it)."""
    cfg = load_run_config(config_path, tuple(overrides), run_id)
    result = run_training(cfg, ablation=ablation, stage=stage,
                          init_checkpoint=init_checkpoint)
    click.echo(f"training complete; manifest at {result.manifest_path}")


def run_training(cfg: RunConfig, ablation=None, stage=None, init_checkpoint=None,
                 run_dir=None, on_substage=None):
    """Programmatic training entry shared by the CLI and the test-suite."""
    ontology = cfg.ontology()
    text_path = cfg.data_path("text")
    image_path = cfg.data_path("image")
    text_docs = load_text_dataset(text_path, ontology) if text_path else []
    image_docs = (
        load_image_dataset(image_path, ontology,
                           strict=bool(cfg.data.get("strict_verbs", False)))
        if image_path
        else []
    )

    sched = cfg.schedule
    plans = ablation_plans(
        ablation,
        stage2_repeats=int(sched.get("stage2_repeats", 1)),
        combined_epochs=int(sched.get("combined_epochs", 10)),
        visual_mention_epochs=int(sched.get("visual_mention_epochs", 10)),
        text_mention_epochs=int(sched.get("text_mention_epochs", 5)),
    )
    if stage is not None:
        plans = [p for p in plans if p.stage == stage]
        if not plans:
            raise ConfigError(f"no stage {stage} in the schedule")
        if stage > 1 and init_checkpoint is None:
            raise ConfigError("--stage beyond 1 requires --init <checkpoint>")
    use_aug = ablation_uses_augmentation(ablation)
    model_cfg = ablation_model_cfg(ablation, cfg.model_config())
    snapshot = cfg.snapshot()
    snapshot["model"] = asdict(model_cfg)
    cache = GenerationCache(cfg.cache_dir) if use_aug else None

    if run_dir is None:
        suffix = f"-{ablation}" if ablation else ""
        run_dir = new_run_dir(cfg.runs_dir, cfg.run_id + "-train" + suffix)

    result = train_run(
        model_cfg=model_cfg,
        ontology=ontology,
        text_docs=text_docs,
        image_docs=image_docs,
        plans=plans,
        opt_cfg=cfg.optimizer_config(),
        out_dir=run_dir,
        config_snapshot=snapshot,
        config_hash=cfg.config_hash,
        use_augmentation=use_aug,
        cache=cache,
        neg_k=cfg.neg_k,
        ablation=ablation,
        init_checkpoint=init_checkpoint,
        on_substage=on_substage,
    )
    return result


# ---------------------------------------------------------------------------
# predict


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              help="Checkpoint file, bundle.json or run directory.")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@_config_options
@_handle_errors
def predict(checkpoint, input_path, out_path, config_path, overrides, run_id):
    """Extract events for multimedia documents."""
    cfg = _config_for_checkpoint(checkpoint, config_path, overrides, run_id)
    ontology = cfg.ontology()
    docs = load_multimedia_dataset(input_path, ontology)
    bundle = load_bundle(checkpoint, ontology)
    records = predict_documents(
        bundle,
        docs,
        scorer=cfg.scorer(),
        merge_cfg=cfg.merge_config(),
        detector=cfg.detector(),
        max_objects=int(cfg.objects.get("max_objects", 20)),
        score_floor=float(cfg.objects.get("score_floor", 0.25)),
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")

    run_dir = new_run_dir(cfg.runs_dir, cfg.run_id + "-predict")
    write_manifest(
        run_dir,
        command="predict",
        config_hash=cfg.config_hash,
        config_snapshot=cfg.snapshot(),
        inputs={"documents": input_path},
        tags={"scorer": cfg.merge.get("scorer", "fixture"),
              "detector": cfg.objects.get("detector", "fixture")},
        outputs=[out_path],
        counters={"documents": len(records)},
    )
    click.echo(f"wrote predictions for {len(records)} documents to {out_path}")


def _config_for_checkpoint(checkpoint, config_path, overrides, run_id) -> RunConfig:
    if config_path is not None:
        return load_run_config(config_path, tuple(overrides), run_id)
    ckpt_path = Path(checkpoint)
    if ckpt_path.is_dir():
        bundle_file = ckpt_path / "bundle.json"
        if not bundle_file.exists():
            bundle_file = ckpt_path / "final" / "bundle.json"
        spec = json.loads(bundle_file.read_text(encoding="utf-8"))
        ckpt_path = Path(spec["mention"])
    elif ckpt_path.suffix == ".json":
        spec = json.loads(ckpt_path.read_text(encoding="utf-8"))
        ckpt_path = Path(spec["mention"])
    payload = load_checkpoint(ckpt_path)
    stored = payload.get("config", {}).get("_config_path")
    if not stored or not Path(stored).exists():
        raise ConfigError(
            "checkpoint does not reference a readable config; pass --config"
        )
    return load_run_config(stored, tuple(overrides), run_id)


# ---------------------------------------------------------------------------
# eval


def _load_gold_and_preds(gold_path, pred_path, ontology, threshold):
    gold_docs = {d.id: d for d in load_multimedia_dataset(gold_path, ontology)}
    pairs = []
    seen = set()
    with open(pred_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            doc_id = record["doc_id"]
            if doc_id not in gold_docs:
                raise ConfigError(f"prediction references unknown document {doc_id!r}")
            seen.add(doc_id)
            events = events_from_prediction(record, threshold=threshold)
            pairs.append((list(gold_docs[doc_id].gold_events), events))
    for doc_id, doc in gold_docs.items():
        if doc_id not in seen:
            pairs.append((list(doc.gold_events), []))
    return pairs


@main.command(name="eval")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=None,
              help="Re-merge multimedia events from stored pair scores at this threshold.")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--ontology", "ontology_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--iou-threshold", type=float, default=0.5)
@_config_options
@_handle_errors
def eval_command(gold_path, pred_path, threshold, report_path, ontology_path,
                 config_path, iou_threshold, overrides, run_id):
    """Score predictions against gold annotations."""
    if config_path is not None:
        cfg = load_run_config(config_path, tuple(overrides), run_id)
        ontology = cfg.ontology()
    elif ontology_path is not None:
        ontology = load_ontology(ontology_path)
    else:
        raise ConfigError("eval needs --ontology or --config to parse the gold file")

    pairs = _load_gold_and_preds(gold_path, pred_path, ontology, threshold)
    report = score_documents(pairs, iou_threshold=iou_threshold)

    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(emit_report(report, "json"), encoding="utf-8")
    click.echo(emit_report(report, "table"))
    click.echo(f"report written to {report_path}")


# ---------------------------------------------------------------------------
# sweep


@main.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--grid", required=True, help="Comma-separated thresholds, e.g. 0.3,0.5,0.7")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--ontology", "ontology_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@_config_options
@_handle_errors
def sweep(gold_path, pred_path, grid, out_dir, ontology_path, config_path,
          overrides, run_id):
    """Evaluate a grid of coreference thresholds; highlight the best."""
    values = [float(v) for v in grid.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep grid is empty")
    if config_path is not None:
        cfg = load_run_config(config_path, tuple(overrides), run_id)
        ontology = cfg.ontology()
    elif ontology_path is not None:
        ontology = load_ontology(ontology_path)
    else:
        raise ConfigError("sweep needs --ontology or --config")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for value in values:
        pairs = _load_gold_and_preds(gold_path, pred_path, ontology, value)
        report = score_documents(pairs)
        (out_dir / f"threshold_{value}.json").write_text(
            emit_report(report, "json"), encoding="utf-8"
        )
        results.append((value, report))

    target = "multimedia-mention"
    best_value, best_report = max(results, key=lambda vr: vr[1].scores[target].f1)
    lines = ["threshold\tmultimedia_mention_f1\tbest"]
    for value, report in results:
        marker = "*" if value == best_value else ""
        lines.append(f"{value}\t{report.scores[target].f1!r}\t{marker}")
    (out_dir / "sweep.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_comparison_files(
        [(f"thr={v}", r) for v, r in results], out_dir, stem="sweep"
    )
    click.echo(f"best {target} F1 {best_report.scores[target].f1:.4f} at threshold {best_value}")


# ---------------------------------------------------------------------------
# report


@main.command()
@click.option("--input", "inputs", multiple=True, required=True,
              type=click.Path(exists=True), help="Score-report JSON file(s).")
@click.option("--names", default=None, help="Comma-separated run names for comparisons.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_handle_errors
def report(inputs, names, out_dir):
    """Render score reports as tables, delimited files and figures."""
    loaded = []
    for path in inputs:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        loaded.append(ScoreReport.from_dict(raw))
    labels = (
        [n.strip() for n in names.split(",")]
        if names
        else [Path(p).stem for p in inputs]
    )
    if len(labels) != len(loaded):
        raise ConfigError("--names count must match --input count")

    out_dir = Path(out_dir)
    written = write_report_files(loaded[0], out_dir, stem=labels[0])
    if len(loaded) > 1:
        written += write_comparison_files(list(zip(labels, loaded)), out_dir)
    click.echo(emit_report(loaded[0], "table"))
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
