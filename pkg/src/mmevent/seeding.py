"""Stable seed derivation so every stochastic choice is reproducible."""

import hashlib
import json


def stable_seed(*parts) -> int:
    """Derive a 63-bit seed from arbitrary JSON-serializable parts.

    Unlike `hash()`, the result is stable across processes and runs.
    """
    payload = json.dumps(parts, sort_keys=True, default=str).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)
