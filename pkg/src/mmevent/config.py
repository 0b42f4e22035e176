"""Run configuration: one YAML file drives every pipeline.

Command-line overrides (`--set a.b=value`) are applied on top of the file
before validation and recorded in the manifest. Relative paths resolve
against the config file's directory. The seed and the merge threshold
must be stated explicitly.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .augmentation.pipeline import GenerationConfig, NucleusConfig
from .coref import MergeConfig
from .data_model import Ontology, load_ontology
from .errors import ConfigError
from .fixtures import FixtureCaptioner, FixtureDetector, FixtureImageGenerator, FixtureSimilarityScorer
from .model import ModelConfig
from .training.schedule import OptimizerConfig


@dataclass
class RunConfig:
    path: Path
    raw: dict
    seed: int
    run_id: str
    runs_dir: Path
    data: dict
    model: dict
    augmentation: dict
    clients: dict
    objects: dict
    merge: dict
    optimizer: dict
    schedule: dict
    overrides: list[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest()

    def snapshot(self) -> dict:
        """Resolved config stored inside checkpoints and manifests."""
        snap = dict(self.raw)
        snap["model"] = asdict(self.model_config())
        snap["_config_path"] = str(self.path)
        snap["_resolved_paths"] = {
            key: str(self.data_path(key))
            for key in ("ontology", "text", "image", "test")
            if self.data.get(key)
        }
        snap["_overrides"] = list(self.overrides)
        return snap

    # -- typed sections -----------------------------------------------------

    def data_path(self, key: str) -> Optional[Path]:
        value = self.data.get(key)
        if not value:
            return None
        return self._resolve(value)

    def _resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (self.path.parent / p).resolve()

    def ontology(self) -> Ontology:
        return load_ontology(self.data_path("ontology"))

    def model_config(self) -> ModelConfig:
        section = dict(self.model)
        if section.get("feature_archive"):
            section["feature_archive"] = str(self._resolve(section["feature_archive"]))
        try:
            return ModelConfig(
                seed=self.seed,
                train_ontology=self.data.get("train_ontology", "target"),
                **section,
            )
        except TypeError as exc:
            raise ConfigError(f"model section: {exc}") from exc

    def generation_config(self) -> GenerationConfig:
        a = self.augmentation
        return GenerationConfig(
            images_per_event=int(a.get("images_per_event", 4)),
            image_size=int(a.get("image_size", 512)),
            denoise_steps=int(a.get("denoise_steps", 100)),
            seed=self.seed,
        )

    def nucleus_config(self) -> NucleusConfig:
        a = self.augmentation
        return NucleusConfig(
            p=float(a.get("nucleus_p", 0.9)),
            captions_per_image=int(a.get("captions_per_image", 1)),
            seed=self.seed,
        )

    def optimizer_config(self) -> OptimizerConfig:
        o = self.optimizer
        try:
            return OptimizerConfig(
                lr=float(o.get("lr", 1e-4)),
                weight_decay=float(o.get("weight_decay", 1e-2)),
                batch_size_visual=int(o.get("batch_size_visual", 64)),
                batch_size_text=int(o.get("batch_size_text", 10)),
                grad_clip=float(o.get("grad_clip", 1.0)),
                seed=self.seed,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"optimizer section: {exc}") from exc

    def merge_config(self) -> MergeConfig:
        if "threshold" not in self.merge:
            raise ConfigError("merge.threshold must be set explicitly in the config")
        return MergeConfig(
            threshold=float(self.merge["threshold"]),
            scorer_tag=str(self.merge.get("scorer", "fixture")),
        )

    @property
    def cache_dir(self) -> Path:
        return self._resolve(self.augmentation.get("cache_dir", "cache"))

    @property
    def neg_k(self) -> int:
        return int(self.augmentation.get("neg_k", 4))

    # -- client construction -------------------------------------------------

    def _world(self) -> tuple[dict[str, str], list[str], set[str]]:
        world_file = self.clients.get("world_file")
        if not world_file:
            return {}, [], set()
        payload = json.loads(self._resolve(world_file).read_text(encoding="utf-8"))
        return (
            payload.get("world", {}),
            payload.get("caption_vocab", []),
            set(payload.get("common_words", ())),
        )

    def image_generator(self):
        kind = self.clients.get("generator", "fixture")
        if kind == "fixture":
            world, _, _ = self._world()
            return FixtureImageGenerator(world=world or None)
        if kind == "http":
            from .remote import HttpImageGenerator

            return HttpImageGenerator(self.clients["generator_url"])
        raise ConfigError(f"unknown image generator kind {kind!r}")

    def captioner(self):
        kind = self.clients.get("captioner", "fixture")
        if kind == "fixture":
            world, vocab, common = self._world()
            if not vocab:
                raise ConfigError(
                    "fixture captioner requires clients.world_file with a caption_vocab"
                )
            return FixtureCaptioner(vocab=vocab, world=world, common_words=common)
        if kind == "http":
            from .remote import HttpCaptioner

            return HttpCaptioner(self.clients["captioner_url"])
        raise ConfigError(f"unknown captioner kind {kind!r}")

    def detector(self):
        kind = self.objects.get("detector", "fixture")
        if kind == "fixture":
            fixture_file = self.objects.get("fixture_file")
            if not fixture_file:
                raise ConfigError("objects.fixture_file required for the fixture detector")
            return FixtureDetector.from_file(self._resolve(fixture_file))
        if kind == "http":
            from .remote import HttpDetector

            return HttpDetector(self.objects["detector_url"])
        raise ConfigError(f"unknown detector kind {kind!r}")

    def scorer(self):
        kind = self.merge.get("scorer", "fixture")
        if kind == "fixture":
            table = self.merge.get("scorer_table")
            if not table:
                raise ConfigError("merge.scorer_table required for the fixture scorer")
            default = self.merge.get("scorer_default")
            return FixtureSimilarityScorer.from_file(
                self._resolve(table),
                default=float(default) if default is not None else None,
            )
        if kind == "http":
            from .remote import HttpScorer

            return HttpScorer(self.merge["scorer_url"])
        raise ConfigError(f"unknown similarity scorer kind {kind!r}")


def _apply_override(raw: dict, spec: str) -> None:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    dotted, value = spec.split("=", 1)
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {spec!r} descends through a non-mapping")
    node[keys[-1]] = yaml.safe_load(value)


def load_run_config(
    path: str | Path,
    overrides: tuple[str, ...] = (),
    run_id: Optional[str] = None,
) -> RunConfig:
    path = Path(path).resolve()
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    for spec in overrides:
        _apply_override(raw, spec)

    if "seed" not in raw:
        raise ConfigError("config must set an explicit `seed` (no wall-clock seeding)")

    cfg = RunConfig(
        path=path,
        raw=raw,
        seed=int(raw["seed"]),
        run_id=run_id or str(raw.get("run_id", "run")),
        runs_dir=Path(raw.get("runs_dir", "runs")),
        data=dict(raw.get("data", {})),
        model=dict(raw.get("model", {})),
        augmentation=dict(raw.get("augmentation", {})),
        clients=dict(raw.get("clients", {})),
        objects=dict(raw.get("objects", {})),
        merge=dict(raw.get("merge", {})),
        optimizer=dict(raw.get("optimizer", {})),
        schedule=dict(raw.get("schedule", {})),
        overrides=list(overrides),
    )
    if not cfg.runs_dir.is_absolute():
        cfg.runs_dir = (path.parent / cfg.runs_dir).resolve()

    if "ontology" not in cfg.data:
        raise ConfigError("data.ontology is required")
    for key in ("ontology", "text", "image", "test"):
        p = cfg.data_path(key)
        if p is not None and not p.exists():
            raise ConfigError(f"data.{key} path {p} does not exist")
    for section, key in (("clients", "world_file"), ("objects", "fixture_file"),
                         ("merge", "scorer_table")):
        value = getattr(cfg, section).get(key)
        if value and not cfg._resolve(value).exists():
            raise ConfigError(f"{section}.{key} path {cfg._resolve(value)} does not exist")

    # Validate eagerly so field-level mistakes fail before any work starts.
    cfg.model_config()
    cfg.optimizer_config()
    cfg.generation_config()
    cfg.nucleus_config()
    return cfg
