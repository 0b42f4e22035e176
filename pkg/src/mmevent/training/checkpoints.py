"""Versioned checkpoint archives with lineage.

A checkpoint stores every parameter group, the optimizer state, the stage
lineage, the resolved config snapshot and a metric snapshot. Checkpoints
are written once and never overwritten.
"""

from pathlib import Path

import torch

from ..errors import ConfigError

FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    model,
    lineage: list[str],
    config_snapshot: dict,
    config_hash: str,
    optimizer_state: dict | None = None,
    metrics: dict | None = None,
) -> Path:
    path = Path(path)
    if path.exists():
        raise ConfigError(f"checkpoint {path} already exists; refusing to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "param_groups": model.group_state(),
            "optimizer": optimizer_state,
            "lineage": list(lineage),
            "config": config_snapshot,
            "config_hash": config_hash,
            "metrics": metrics or {},
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> dict:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format version {version!r}")
    return payload


def restore_model(model, payload: dict) -> None:
    model.load_group_state(payload["param_groups"])
