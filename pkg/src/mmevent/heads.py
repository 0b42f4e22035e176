"""The four linear classifiers and the 3-patch object feature.

Every head consumes the concatenation of raw encoder features with the
fused cross-modality feature (class index 0 is the null class: non-trigger
/ non-event / no-role). When fusion is disabled the fused part is dropped
and the input narrows accordingly.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data_model import ObjectBox
from .encoders import ImageEncoding, TextEncoding, patch_index
from .errors import ContractError
from .fusion import FusionContext

NULL_CLASS = 0


@dataclass
class ObjectFeature:
    vector: torch.Tensor  # [d], mean of the three selected patch rows
    patch_indices: tuple[int, int, int]


def extract_object_feature(
    box: tuple[int, int, int, int] | ObjectBox,
    image_enc: ImageEncoding,
    canonical_size: int,
) -> ObjectFeature:
    """Average the patches under the box corners and center.

    `box` must already be in canonical pixel space. Degenerate boxes are
    fine: the three indices may coincide.
    """
    if isinstance(box, ObjectBox):
        x1, y1, x2, y2 = box.x1, box.y1, box.x2, box.y2
    else:
        x1, y1, x2, y2 = box
    grid = image_enc.grid
    indices = (
        patch_index((x1, y1), grid, canonical_size),
        patch_index(((x1 + x2) // 2, (y1 + y2) // 2), grid, canonical_size),
        patch_index((x2, y2), grid, canonical_size),
    )
    rows = image_enc.patches[list(indices)]
    return ObjectFeature(vector=rows.mean(dim=0), patch_indices=indices)


class ClassifierHeads(nn.Module):
    """One linear layer per task over concatenated features."""

    def __init__(self, d: int, n_event_types: int, n_roles: int,
                 use_fusion: bool = True, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.d = d
        self.use_fusion = use_fusion
        mention_in = 2 * d if use_fusion else d
        argument_in = 3 * d if use_fusion else 2 * d
        kw = {"dtype": dtype}
        self.layers = nn.ModuleDict(
            {
                "text-mention": nn.Linear(mention_in, n_event_types + 1, **kw),
                "text-argument": nn.Linear(argument_in, n_roles + 1, **kw),
                "visual-mention": nn.Linear(mention_in, n_event_types + 1, **kw),
                "visual-argument": nn.Linear(argument_in, n_roles + 1, **kw),
            }
        )

    def head(self, task: str) -> nn.Linear:
        if task not in self.layers:
            raise ContractError(f"unknown task {task!r}")
        return self.layers[task]


def _fused(q: torch.Tensor, ctx: FusionContext | None, fusion, task: str):
    if fusion is None:
        return None
    if ctx is None:
        raise ContractError(f"task {task!r} requires a fusion context")
    return fusion(q, ctx, task)


def classify_textual_trigger(
    word_index: int,
    text_enc: TextEncoding,
    ctx: FusionContext | None,
    fusion,
    heads: ClassifierHeads,
) -> torch.Tensor:
    """Logits over {null} + event types for one word."""
    h = text_enc.tokens[text_enc.word_map[word_index]]
    g = _fused(h, ctx, fusion, "text-mention")
    x = h if g is None else torch.cat([h, g])
    return heads.head("text-mention")(x)


def textual_trigger_logits(
    text_enc: TextEncoding,
    ctx: FusionContext | None,
    fusion,
    heads: ClassifierHeads,
) -> torch.Tensor:
    """Batched trigger logits for every word of the sentence: [L, C]."""
    h = text_enc.tokens[list(text_enc.word_map)]
    if fusion is None:
        x = h
    else:
        if ctx is None:
            raise ContractError("text-mention requires a fusion context")
        x = torch.cat([h, fusion(h, ctx, "text-mention")], dim=-1)
    return heads.head("text-mention")(x)


def classify_textual_argument(
    entity_start: int,
    trigger_index: int,
    text_enc: TextEncoding,
    ctx: FusionContext | None,
    fusion,
    heads: ClassifierHeads,
) -> torch.Tensor:
    """Logits over {null} + roles for one (entity, trigger) pair.

    The entity feature is the encoding of the entity's first word.
    """
    h_ent = text_enc.tokens[text_enc.word_map[entity_start]]
    h_trig = text_enc.tokens[text_enc.word_map[trigger_index]]
    g = _fused(h_ent, ctx, fusion, "text-argument")
    parts = [h_ent] if g is None else [h_ent, g]
    parts.append(h_trig)
    return heads.head("text-argument")(torch.cat(parts))


def classify_visual_event(
    image_enc: ImageEncoding,
    ctx: FusionContext | None,
    fusion,
    heads: ClassifierHeads,
) -> torch.Tensor:
    """Logits over {null} + event types for one image (CLS feature)."""
    h = image_enc.cls
    g = _fused(h, ctx, fusion, "visual-mention")
    x = h if g is None else torch.cat([h, g])
    return heads.head("visual-mention")(x)


def classify_visual_argument(
    obj: ObjectFeature,
    image_enc: ImageEncoding,
    ctx: FusionContext | None,
    fusion,
    heads: ClassifierHeads,
) -> torch.Tensor:
    """Logits over {null} + roles for one object box."""
    h_obj = obj.vector
    g = _fused(h_obj, ctx, fusion, "visual-argument")
    parts = [h_obj] if g is None else [h_obj, g]
    parts.append(image_enc.cls)
    return heads.head("visual-argument")(torch.cat(parts))


def decode_class(logits: torch.Tensor) -> int:
    """Argmax with ties broken toward the lowest class index."""
    return int(np.argmax(logits.detach().cpu().numpy()))
