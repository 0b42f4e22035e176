"""Text and image encoders behind a backend-agnostic interface.

Two backends ship with the package:

* the toy backend hashes token/patch content into fixed unit vectors and
  passes them through one learnable linear layer, so encodings are
  deterministic in the input bytes yet still provide gradients;
* the precomputed backend serves feature matrices from an archive file,
  for runs where the real pretrained backbones ran elsewhere.

Images are resized to a canonical square input before patching; boxes are
mapped into that canonical pixel space before any patch lookup.
"""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data_model import ImageDoc, ObjectBox, Sentence
from .errors import ContractError, LoadError
from .seeding import stable_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderConfig:
    d: int
    patch_size: int = 16
    canonical_size: int = 224
    max_text_length: int = 200
    backend_tag: str = "toy"

    def __post_init__(self):
        if self.d <= 0:
            raise ContractError("embedding dimension d must be positive")
        if self.patch_size <= 0 or self.canonical_size <= 0:
            raise ContractError("patch/canonical sizes must be positive")

    @property
    def grid(self) -> tuple[int, int]:
        side = self.canonical_size // self.patch_size
        return (side, side)


@dataclass
class TextEncoding:
    cls: torch.Tensor  # [d]
    tokens: torch.Tensor  # [T, d]
    word_map: tuple[int, ...]  # word index -> first sub-token row


@dataclass
class ImageEncoding:
    cls: torch.Tensor  # [d]
    patches: torch.Tensor  # [P, d]
    grid: tuple[int, int]


# ---------------------------------------------------------------------------
# patch geometry


def patch_index(
    point: tuple[int, int], grid: tuple[int, int], canonical_size: int
) -> int:
    """Index of the patch containing a canonical-space pixel (clamped)."""
    rows, cols = grid
    patch = canonical_size // cols
    x = min(max(int(point[0]), 0), canonical_size - 1)
    y = min(max(int(point[1]), 0), canonical_size - 1)
    row = min(y // patch, rows - 1)
    col = min(x // patch, cols - 1)
    return row * cols + col


def to_canonical_box(
    box: ObjectBox, width: int, height: int, canonical_size: int
) -> tuple[int, int, int, int]:
    """Map inclusive box corners from source pixels into canonical pixels."""

    def _scale(v: int, dim: int) -> int:
        return min(max(int(v * canonical_size / dim), 0), canonical_size - 1)

    return (
        _scale(box.x1, width),
        _scale(box.y1, height),
        _scale(box.x2, width),
        _scale(box.y2, height),
    )


# ---------------------------------------------------------------------------
# toy backend


def hash_vector(content: bytes, seed: int, d: int) -> np.ndarray:
    """Unit-norm float32 vector derived deterministically from bytes."""
    rng = np.random.default_rng(stable_seed("hashvec", seed, content.hex()))
    v = rng.standard_normal(d)
    return (v / np.linalg.norm(v)).astype(np.float32)


def _unit(x: torch.Tensor) -> torch.Tensor:
    # Bounded outputs keep downstream attention logits from saturating,
    # mirroring the layer-normed outputs of real pretrained encoders.
    return x / x.norm(dim=-1, keepdim=True).clamp_min(1e-8)


class ToyTextEncoder(nn.Module):
    """Hash-embedding text encoder with one learnable projection.

    A word is represented by its first sub-token (default sub-word hook is
    the identity). The CLS vector is the projected mean of all sub-token
    base embeddings. Outputs are unit-normalized.
    """

    def __init__(self, cfg: EncoderConfig, seed: int = 0, subword_splitter=None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.seed = seed
        self.splitter = subword_splitter or (lambda word: [word])
        self.proj = nn.Linear(cfg.d, cfg.d, dtype=dtype)
        self._base_cache: dict[str, np.ndarray] = {}

    def _base(self, content: str) -> np.ndarray:
        vec = self._base_cache.get(content)
        if vec is None:
            vec = hash_vector(content.encode("utf-8"), self.seed, self.cfg.d)
            self._base_cache[content] = vec
        return vec

    def encode(self, sentence: Sentence) -> TextEncoding:
        if not sentence.words:
            raise ContractError(f"sentence {sentence.id!r} is empty")
        words = sentence.words
        if len(words) > self.cfg.max_text_length:
            log.warning(
                "sentence %s truncated from %d to %d words",
                sentence.id, len(words), self.cfg.max_text_length,
            )
            words = words[: self.cfg.max_text_length]

        bases: list[np.ndarray] = []
        word_map: list[int] = []
        for word in words:
            word_map.append(len(bases))
            for sub in self.splitter(word):
                bases.append(self._base("tok:" + sub))
        stack = torch.from_numpy(np.stack(bases)).to(self.proj.weight.dtype)
        tokens = _unit(self.proj(stack))
        cls = _unit(self.proj(stack.mean(dim=0)))
        return TextEncoding(cls=cls, tokens=tokens, word_map=tuple(word_map))


class ToyImageEncoder(nn.Module):
    """Hash-embedding image encoder over byte-content patches.

    The image byte stream is divided into P equal slices standing in for
    the canonical patch grid; each slice hashes to a base vector. The CLS
    vector is the projected mean of the patch bases, so images sharing
    most content land near each other.
    """

    def __init__(self, cfg: EncoderConfig, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.seed = seed
        self.proj = nn.Linear(cfg.d, cfg.d, dtype=dtype)
        self._content_cache: dict[str, np.ndarray] = {}

    def _read(self, source: str) -> bytes:
        # A resolvable path is read from disk; any other reference string is
        # treated as opaque content so fixtures need no files.
        if os.path.exists(source):
            return open(source, "rb").read()
        return source.encode("utf-8")

    def _patch_bases(self, source: str) -> np.ndarray:
        bases = self._content_cache.get(source)
        if bases is not None:
            return bases
        data = self._read(source)
        rows, cols = self.cfg.grid
        P = rows * cols
        out = np.empty((P, self.cfg.d), dtype=np.float32)
        n = len(data)
        for i in range(P):
            chunk = data[(i * n) // P : ((i + 1) * n) // P]
            out[i] = hash_vector(b"patch:" + chunk, self.seed, self.cfg.d)
        self._content_cache[source] = out
        return out

    def encode(self, image: ImageDoc) -> ImageEncoding:
        bases = torch.from_numpy(self._patch_bases(image.source)).to(
            self.proj.weight.dtype
        )
        patches = _unit(self.proj(bases))
        cls = _unit(self.proj(bases.mean(dim=0)))
        return ImageEncoding(cls=cls, patches=patches, grid=self.cfg.grid)


# ---------------------------------------------------------------------------
# precomputed-feature backend


def write_feature_archive(
    path,
    cfg: EncoderConfig,
    text_entries: dict[str, tuple[np.ndarray, np.ndarray, list[int]]] | None = None,
    image_entries: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
) -> None:
    """Write an id -> (matrix, cls) archive with a JSON header."""
    arrays: dict[str, np.ndarray] = {
        "__header__": np.frombuffer(
            json.dumps(
                {
                    "d": cfg.d,
                    "backend_tag": cfg.backend_tag,
                    "patch_size": cfg.patch_size,
                    "canonical_size": cfg.canonical_size,
                }
            ).encode("utf-8"),
            dtype=np.uint8,
        )
    }
    for sid, (tokens, cls, word_map) in (text_entries or {}).items():
        arrays[f"text:{sid}:tokens"] = tokens.astype(np.float32)
        arrays[f"text:{sid}:cls"] = cls.astype(np.float32)
        arrays[f"text:{sid}:wordmap"] = np.asarray(word_map, dtype=np.int64)
    for iid, (patches, cls) in (image_entries or {}).items():
        arrays[f"image:{iid}:patches"] = patches.astype(np.float32)
        arrays[f"image:{iid}:cls"] = cls.astype(np.float32)
    np.savez(path, **arrays)


class PrecomputedEncoder(nn.Module):
    """Serves encodings from a feature archive; has no trainable weights."""

    def __init__(self, path, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self._archive = np.load(path)
        header = json.loads(bytes(self._archive["__header__"]).decode("utf-8"))
        if header["d"] != cfg.d:
            raise LoadError(
                f"feature archive d={header['d']} does not match config d={cfg.d}"
            )
        self.header = header

    def encode(self, item) -> TextEncoding | ImageEncoding:
        if isinstance(item, Sentence):
            try:
                tokens = self._archive[f"text:{item.id}:tokens"]
                cls = self._archive[f"text:{item.id}:cls"]
                word_map = self._archive[f"text:{item.id}:wordmap"]
            except KeyError as exc:
                raise LoadError(f"no precomputed features for sentence {item.id!r}") from exc
            return TextEncoding(
                cls=torch.from_numpy(cls),
                tokens=torch.from_numpy(tokens),
                word_map=tuple(int(i) for i in word_map),
            )
        if isinstance(item, ImageDoc):
            try:
                patches = self._archive[f"image:{item.id}:patches"]
                cls = self._archive[f"image:{item.id}:cls"]
            except KeyError as exc:
                raise LoadError(f"no precomputed features for image {item.id!r}") from exc
            return ImageEncoding(
                cls=torch.from_numpy(cls),
                patches=torch.from_numpy(patches),
                grid=self.cfg.grid,
            )
        raise ContractError(f"cannot encode {type(item).__name__}")


def encode_text(sentence: Sentence, encoder, cfg: EncoderConfig) -> TextEncoding:
    enc = encoder.encode(sentence)
    if enc.tokens.shape[-1] != cfg.d:
        raise ContractError("encoder emitted wrong embedding dimension")
    return enc


def encode_image(image: ImageDoc, encoder, cfg: EncoderConfig) -> ImageEncoding:
    enc = encoder.encode(image)
    if enc.patches.shape[-1] != cfg.d:
        raise ContractError("encoder emitted wrong embedding dimension")
    return enc
