"""The full network: two encoders, shared fusion, four heads.

Parameters are organized into named groups — the units the training
schedule freezes and unfreezes:

    text_encoder, image_encoder, adapter_shared,
    adapter_task.<task>, head.<task>
"""

from dataclasses import dataclass, field

import torch
from torch import nn

from .data_model import Ontology
from .encoders import EncoderConfig, PrecomputedEncoder, ToyImageEncoder, ToyTextEncoder
from .errors import ConfigError
from .fusion import TASKS, build_fusion
from .heads import ClassifierHeads


@dataclass(frozen=True)
class ModelConfig:
    d: int = 32
    n_heads: int = 8
    d_ff: int | None = None
    fusion_mode: str = "adapter"  # adapter | cosine | none
    encoder_backend: str = "toy"  # toy | precomputed
    feature_archive: str | None = None
    patch_size: int = 16
    canonical_size: int = 224
    max_text_length: int = 200
    train_ontology: str = "target"  # target | full
    seed: int = 0

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            d=self.d,
            patch_size=self.patch_size,
            canonical_size=self.canonical_size,
            max_text_length=self.max_text_length,
            backend_tag=self.encoder_backend,
        )


@dataclass
class LabelSpaces:
    """Class index layouts; index 0 is always the null class."""

    event_types: tuple[str, ...]
    roles: tuple[str, ...]
    type_to_idx: dict[str, int] = field(init=False)
    role_to_idx: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.type_to_idx = {t: i + 1 for i, t in enumerate(self.event_types)}
        self.role_to_idx = {r: i + 1 for i, r in enumerate(self.roles)}

    def type_index(self, event_type: str | None) -> int:
        return 0 if event_type is None else self.type_to_idx[event_type]

    def role_index(self, role: str | None) -> int:
        return 0 if role is None else self.role_to_idx[role]

    def type_name(self, idx: int) -> str | None:
        return None if idx == 0 else self.event_types[idx - 1]

    def role_name(self, idx: int) -> str | None:
        return None if idx == 0 else self.roles[idx - 1]


def label_spaces(ontology: Ontology, train_ontology: str = "target") -> LabelSpaces:
    if train_ontology == "target":
        types = ontology.target_types
    elif train_ontology == "full":
        types = ontology.event_types
    else:
        raise ConfigError(f"train_ontology must be 'target' or 'full', got {train_ontology!r}")
    return LabelSpaces(event_types=types, roles=ontology.roles_union())


class MultimediaEventModel(nn.Module):
    def __init__(self, cfg: ModelConfig, ontology: Ontology,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        torch.manual_seed(cfg.seed)
        self.cfg = cfg
        self.encoder_cfg = cfg.encoder_config()
        self.labels = label_spaces(ontology, cfg.train_ontology)

        if cfg.encoder_backend == "toy":
            self.text_encoder = ToyTextEncoder(self.encoder_cfg, seed=cfg.seed, dtype=dtype)
            self.image_encoder = ToyImageEncoder(self.encoder_cfg, seed=cfg.seed, dtype=dtype)
        elif cfg.encoder_backend == "precomputed":
            if not cfg.feature_archive:
                raise ConfigError("precomputed backend requires feature_archive")
            self.text_encoder = PrecomputedEncoder(cfg.feature_archive, self.encoder_cfg)
            self.image_encoder = self.text_encoder
        else:
            raise ConfigError(f"unknown encoder backend {cfg.encoder_backend!r}")

        self.fusion = build_fusion(
            cfg.fusion_mode, cfg.d, n_heads=cfg.n_heads, d_ff=cfg.d_ff, dtype=dtype
        )
        self.heads = ClassifierHeads(
            cfg.d,
            n_event_types=len(self.labels.event_types),
            n_roles=len(self.labels.roles),
            use_fusion=self.fusion is not None,
            dtype=dtype,
        )

    # -- parameter groups ---------------------------------------------------

    def group_names(self) -> tuple[str, ...]:
        return (
            "text_encoder",
            "image_encoder",
            "adapter_shared",
            *(f"adapter_task.{t}" for t in TASKS),
            *(f"head.{t}" for t in TASKS),
        )

    def parameter_groups(self) -> dict[str, dict[str, nn.Parameter]]:
        """Partition of all parameters into the named freeze groups."""
        groups: dict[str, dict[str, nn.Parameter]] = {
            name: {} for name in self.group_names()
        }
        for name, p in self.text_encoder.named_parameters():
            groups["text_encoder"][f"text_encoder.{name}"] = p
        if self.image_encoder is not self.text_encoder:
            for name, p in self.image_encoder.named_parameters():
                groups["image_encoder"][f"image_encoder.{name}"] = p
        if self.fusion is not None:
            for name, p in self.fusion.named_parameters():
                full = f"fusion.{name}"
                if name.startswith("task_proj."):
                    task = name.split(".")[1]
                    groups[f"adapter_task.{task}"][full] = p
                else:
                    groups["adapter_shared"][full] = p
        for task in TASKS:
            layer = self.heads.layers[task]
            for name, p in layer.named_parameters():
                groups[f"head.{task}"][f"heads.{task}.{name}"] = p
        return groups

    def group_state(self) -> dict[str, dict[str, torch.Tensor]]:
        return {
            group: {name: p.detach().clone() for name, p in params.items()}
            for group, params in self.parameter_groups().items()
        }

    def load_group_state(self, state: dict[str, dict[str, torch.Tensor]]) -> None:
        groups = self.parameter_groups()
        for group, tensors in state.items():
            if group not in groups:
                raise ConfigError(f"checkpoint group {group!r} unknown to this model")
            for name, tensor in tensors.items():
                if name not in groups[group]:
                    raise ConfigError(f"checkpoint parameter {name!r} unknown")
                with torch.no_grad():
                    groups[group][name].copy_(tensor)

    # -- encoding helpers ---------------------------------------------------

    def encode_sentence(self, sentence):
        return self.text_encoder.encode(sentence)

    def encode_image(self, image):
        return self.image_encoder.encode(image)
