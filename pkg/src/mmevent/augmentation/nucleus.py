"""Nucleus (top-p) candidate filtering used by the caption sampler."""

import numpy as np

from ..errors import ContractError


def nucleus_filter(probs, p: float) -> tuple[list[int], np.ndarray]:
    """Keep the smallest descending-probability prefix with mass > p.

    Candidates are added greedily in order of decreasing probability
    (ties broken by ascending token index) until their cumulative mass
    strictly exceeds `p`; if it never does, the whole vocabulary is kept.
    Returns the candidate indices and their renormalized probabilities.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ContractError("probs must be a non-empty 1-D vector")
    if np.any(probs < 0):
        raise ContractError("probs must be non-negative")
    if abs(float(probs.sum()) - 1.0) > 1e-6:
        raise ContractError(f"probs sum to {probs.sum():.8f}, expected 1")
    if not (0.0 < p <= 1.0):
        raise ContractError(f"p must be in (0, 1], got {p}")

    order = np.argsort(-probs, kind="stable")
    candidates: list[int] = []
    cumulative = 0.0
    for idx in order:
        candidates.append(int(idx))
        cumulative += float(probs[idx])
        if cumulative > p:
            break

    kept = probs[candidates]
    return candidates, kept / kept.sum()


def nucleus_sample(probs, p: float, rng: np.random.Generator) -> int:
    """Draw one token index from the renormalized nucleus."""
    candidates, renorm = nucleus_filter(probs, p)
    return int(rng.choice(candidates, p=renorm))
