"""Run directories and provenance manifests."""

import hashlib
import json
import time
from pathlib import Path

from .errors import ConfigError


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def new_run_dir(runs_root: str | Path, run_id: str) -> Path:
    run_dir = Path(runs_root) / run_id
    if run_dir.exists() and any(run_dir.iterdir()):
        raise ConfigError(
            f"run directory {run_dir} already has artifacts; pick a new --run-id"
        )
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(
    run_dir: str | Path,
    command: str,
    config_hash: str,
    config_snapshot: dict,
    inputs: dict[str, str | Path],
    tags: dict[str, str],
    outputs: list[str | Path],
    counters: dict | None = None,
    extra: dict | None = None,
) -> Path:
    run_dir = Path(run_dir)
    manifest = {
        "command": command,
        "config_hash": config_hash,
        "config": config_snapshot,
        "inputs": {
            name: {"path": str(p), "sha256": file_sha256(p)}
            for name, p in inputs.items()
            if p is not None
        },
        "tags": tags,
        "outputs": [
            {"path": str(p), "sha256": file_sha256(p)} for p in outputs
        ],
        "counters": counters or {},
        "created_at": time.time(),
    }
    if extra:
        manifest.update(extra)
    path = run_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path
