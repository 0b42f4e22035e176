"""Content-addressed cache for generated payloads.

Keys are SHA-256 digests of (subject, config, generator tag); payloads
live under ``<root>/<modality>/<key[:2]>/<key>/`` as numbered files with
a ``meta.json`` sidecar. Writers build entries in a temp directory and
publish with an atomic rename, so concurrent writers of the same key are
safe (first one wins, the rest discard their copy).
"""

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class CacheEntry:
    key: str
    modality: str
    path: Path
    payload_paths: tuple[Path, ...]
    meta: dict


class GenerationCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.reads = 0
        self.writes = 0
        self._recorded: set[tuple] | None = None

    @staticmethod
    def key_for(subject: str, config: dict, generator_tag: str) -> str:
        payload = json.dumps(
            {"subject": subject, "config": config, "tag": generator_tag},
            sort_keys=True,
        ).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def _entry_dir(self, modality: str, key: str) -> Path:
        return self.root / modality / key[:2] / key

    def lookup(self, modality: str, key: str) -> Optional[CacheEntry]:
        self.reads += 1
        entry_dir = self._entry_dir(modality, key)
        meta_path = entry_dir / "meta.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        payloads = tuple(sorted(entry_dir.glob("p*.bin")))
        return CacheEntry(key=key, modality=modality, path=entry_dir,
                          payload_paths=payloads, meta=meta)

    def store(
        self,
        modality: str,
        key: str,
        payloads: list[bytes],
        meta: dict,
        origin: Optional[tuple] = None,
    ) -> CacheEntry:
        """Publish payloads under `key`; a concurrent winner is kept as-is."""
        entry_dir = self._entry_dir(modality, key)
        entry_dir.parent.mkdir(parents=True, exist_ok=True)
        tmp_dir = Path(
            tempfile.mkdtemp(prefix=f".{key[:8]}-", dir=entry_dir.parent)
        )
        try:
            for i, blob in enumerate(payloads):
                (tmp_dir / f"p{i:03d}.bin").write_bytes(blob)
            (tmp_dir / "meta.json").write_text(
                json.dumps(meta, sort_keys=True), encoding="utf-8"
            )
            try:
                os.rename(tmp_dir, entry_dir)
                self.writes += 1
            except OSError:
                # Entry already exists: another writer won the race.
                shutil.rmtree(tmp_dir, ignore_errors=True)
        finally:
            shutil.rmtree(tmp_dir, ignore_errors=True)
        self.record_origin(modality, key, meta.get("generator_tag"), origin)
        entry = self.lookup(modality, key)
        assert entry is not None
        return entry

    def record_origin(self, modality: str, key: str, generator_tag, origin) -> None:
        """Append an origin -> key manifest line (idempotent per origin).

        Distinct origins may share one content-addressed entry (identical
        prompts collide on purpose), so the manifest is the only complete
        origin index.
        """
        if self._recorded is None:
            self._recorded = {
                (e["modality"], e["key"], tuple(e["origin"] or ()))
                for e in self.manifest_entries()
            }
        mark = (modality, key, tuple(origin or ()))
        if mark in self._recorded:
            return
        self._recorded.add(mark)
        line = json.dumps(
            {
                "origin": list(origin) if origin is not None else None,
                "key": key,
                "modality": modality,
                "generator_tag": generator_tag,
                "timestamp": time.time(),
            },
            sort_keys=True,
        )
        with open(self.root / MANIFEST_NAME, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def manifest_entries(self) -> list[dict]:
        path = self.root / MANIFEST_NAME
        if not path.exists():
            return []
        return [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
