"""Deterministic in-process doubles for the external services.

The doubles share one toy visual semantics: an image is a byte string
made of fixed-size slots, and each slot holds the digest block of a
"visual token". The image generator translates prompt words to visual
tokens through a small world map and renders their blocks; the captioner
inverts the mapping by counting which blocks occur in the bytes. Images
that depict the same things therefore share byte content, which the toy
encoders turn into nearby embeddings — so generated and "real" pictures
of one event type genuinely resemble each other.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .augmentation.clients import CaptionRequest, ImageRequest
from .augmentation.nucleus import nucleus_sample
from .data_model import ImageDoc, ObjectBox, Sentence
from .seeding import stable_seed

SLOT_BYTES = 32
DEFAULT_SLOTS = 16
END_TOKEN = "<end>"


def visual_block(token: str) -> bytes:
    return hashlib.sha256(f"vis:{token}".encode("utf-8")).digest()[:SLOT_BYTES]


def render_visual_bytes(
    tokens: list[str],
    noise_seed: int,
    n_slots: int = DEFAULT_SLOTS,
    noise_slots: int = 2,
) -> bytes:
    """Compose an image byte string from visual-token blocks plus noise.

    Tokens are laid out sorted so images showing the same things share
    slot content regardless of mention order.
    """
    rng = np.random.default_rng(stable_seed("render", noise_seed))
    ordered = sorted(tokens) if tokens else []
    slots = []
    for s in range(n_slots):
        if s >= n_slots - noise_slots or not ordered:
            slots.append(rng.bytes(SLOT_BYTES))
        else:
            slots.append(visual_block(ordered[s % len(ordered)]))
    return b"".join(slots)


def read_image_bytes(source: str) -> bytes:
    """File contents when the reference resolves, else the reference itself."""
    if os.path.exists(source):
        return open(source, "rb").read()
    return source.encode("utf-8")


class FixtureImageGenerator:
    """Renders prompt words into toy image bytes, varied per index."""

    def __init__(self, world: Optional[dict[str, str]] = None,
                 n_slots: int = DEFAULT_SLOTS, tag: str = "fixture-imagegen"):
        self.world = world or {}
        self.n_slots = n_slots
        self.tag = tag
        self.calls = 0

    def _tokens(self, prompt: str) -> list[str]:
        tokens = []
        for word in prompt.split():
            vis = self.world.get(word, word if not self.world else None)
            if vis is not None:
                tokens.append(vis)
        return tokens

    def generate(self, request: ImageRequest) -> list[bytes]:
        self.calls += 1
        tokens = self._tokens(request.prompt)
        return [
            render_visual_bytes(
                tokens,
                noise_seed=stable_seed(request.prompt, request.seed, i),
                n_slots=self.n_slots,
            )
            for i in range(request.n)
        ]


class FixtureCaptioner:
    """Nucleus-sampling captioner over a fixed vocabulary.

    Per-step token probabilities are exposed via `step_probs` and favor
    vocabulary words whose visual block occurs in the image bytes; the
    sampling loop runs the package's own nucleus filter.
    """

    def __init__(self, vocab: list[str], world: Optional[dict[str, str]] = None,
                 common_words: Optional[set[str]] = None,
                 min_len: int = 2, max_len: int = 8, tag: str = "fixture-captioner"):
        self.vocab = list(vocab)
        self.world = world or {}
        self.common_words = set(common_words or ())
        self.min_len = min_len
        self.max_len = max_len
        self.tag = tag
        self.calls = 0

    def step_probs(self, image_bytes: bytes, step: int) -> np.ndarray:
        """Distribution over vocab + end token (end token is last)."""
        weights = np.empty(len(self.vocab) + 1, dtype=np.float64)
        for i, word in enumerate(self.vocab):
            block = visual_block(self.world.get(word, word))
            weights[i] = 1.0 + 50.0 * image_bytes.count(block)
            if word in self.common_words:
                weights[i] += 4.0
        if step >= self.max_len:
            weights[:] = 0.0
            weights[-1] = 1.0
        elif step < self.min_len:
            weights[-1] = 0.0
        else:
            ramp = (step - self.min_len + 1) / (self.max_len - self.min_len + 1)
            weights[-1] = weights[:-1].sum() * ramp
        return weights / weights.sum()

    def caption(self, request: CaptionRequest) -> str:
        self.calls += 1
        data = read_image_bytes(request.image_ref)
        rng = np.random.default_rng(
            stable_seed("caption", request.image_ref, request.seed)
        )
        words: list[str] = []
        end_index = len(self.vocab)
        for step in range(self.max_len + 1):
            idx = nucleus_sample(self.step_probs(data, step), request.p, rng)
            if idx == end_index:
                break
            words.append(self.vocab[idx])
        return " ".join(words)


class FixtureSimilarityScorer:
    """Similarity read from a (sentence id, image id) -> score table."""

    def __init__(self, table: dict[tuple[str, str], float],
                 default: Optional[float] = None, tag: str = "fixture-scorer"):
        self.table = dict(table)
        self.default = default
        self.tag = tag

    @classmethod
    def from_file(cls, path: str | Path, default: Optional[float] = None,
                  tag: str = "fixture-scorer") -> "FixtureSimilarityScorer":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                table[(row["sentence_id"], row["image_id"])] = float(row["score"])
        return cls(table, default=default, tag=tag)

    def score(self, sentence: Sentence, image: ImageDoc) -> float:
        key = (sentence.id, image.id)
        if key in self.table:
            return self.table[key]
        if self.default is not None:
            return self.default
        raise KeyError(f"no fixture similarity for pair {key!r}")


class FixtureDetector:
    """Object proposals read from per-image pre-annotated fixtures."""

    def __init__(self, boxes_by_image: dict[str, list[ObjectBox]],
                 tag: str = "fixture-detector"):
        self.boxes_by_image = boxes_by_image
        self.tag = tag
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, tag: str = "fixture-detector") -> "FixtureDetector":
        by_image: dict[str, list[ObjectBox]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                by_image[row["image_id"]] = [
                    ObjectBox(*o["box"], label=o.get("label"), score=o.get("score"))
                    for o in row.get("objects", ())
                ]
        return cls(by_image, tag=tag)

    def detect(self, image: ImageDoc) -> list[ObjectBox]:
        self.calls += 1
        boxes = list(self.boxes_by_image.get(image.id, ()))
        boxes.sort(key=lambda b: -(b.score or 0.0))
        return boxes
