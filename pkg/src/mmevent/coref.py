"""Multimedia event coreference.

A textual event and a visual event corefer iff they share the event type
and the similarity between the trigger's sentence and the trigger image
exceeds the threshold. Each event merges with at most one partner, chosen
by highest similarity (ties broken by sentence id then image id); the
merged event carries both triggers and the union of arguments.
"""

from dataclasses import dataclass, replace
from typing import Protocol

from .data_model import EventMention, ImageDoc, MultimediaDocument, Sentence
from .errors import ContractError, EvaluationError


class SimilarityScorer(Protocol):
    tag: str

    def score(self, sentence: Sentence, image: ImageDoc) -> float: ...


@dataclass(frozen=True)
class MergeConfig:
    threshold: float = 0.5
    scorer_tag: str = "fixture"

    def __post_init__(self):
        if not (-1.0 <= self.threshold <= 1.0):
            raise ContractError("threshold must lie in [-1, 1]")


@dataclass(frozen=True)
class MergeResult:
    multimedia: tuple[EventMention, ...]
    text_only: tuple[EventMention, ...]
    visual_only: tuple[EventMention, ...]
    pair_scores: dict[tuple[str, str], float]  # (sentence id, image id) -> sim

    @property
    def all_events(self) -> tuple[EventMention, ...]:
        return self.multimedia + self.text_only + self.visual_only


def score_pairs(
    text_events: list[EventMention],
    visual_events: list[EventMention],
    doc: MultimediaDocument,
    scorer: SimilarityScorer,
) -> dict[tuple[str, str], float]:
    """Similarity for every (trigger sentence, trigger image) pair in play."""
    scores: dict[tuple[str, str], float] = {}
    for te in text_events:
        sid = te.text_trigger[0]
        sentence = doc.sentence(sid)
        if sentence is None:
            raise ContractError(f"event references unknown sentence {sid!r}")
        for ve in visual_events:
            iid = ve.image_trigger
            if (sid, iid) in scores:
                continue
            image = doc.image(iid)
            if image is None:
                raise ContractError(f"event references unknown image {iid!r}")
            try:
                scores[(sid, iid)] = float(scorer.score(sentence, image))
            except Exception as exc:
                raise EvaluationError(
                    f"similarity scoring failed for ({sid!r}, {iid!r}): {exc}"
                ) from exc
    return scores


def merge_from_scores(
    text_events: list[EventMention],
    visual_events: list[EventMention],
    pair_scores: dict[tuple[str, str], float],
    cfg: MergeConfig,
) -> MergeResult:
    """Merge using precomputed pair similarities (used by eval/sweep)."""
    candidates = []
    for ti, te in enumerate(text_events):
        if te.text_trigger is None:
            raise ContractError("textual event without text trigger")
        for vi, ve in enumerate(visual_events):
            if ve.image_trigger is None:
                raise ContractError("visual event without image trigger")
            if te.event_type != ve.event_type:
                continue
            key = (te.text_trigger[0], ve.image_trigger)
            sim = pair_scores.get(key)
            if sim is None:
                raise EvaluationError(f"no similarity score for pair {key!r}")
            if sim > cfg.threshold:
                candidates.append((-sim, key[0], key[1], ti, vi))

    candidates.sort()
    taken_text: set[int] = set()
    taken_visual: set[int] = set()
    merged: list[EventMention] = []
    for _, _, _, ti, vi in candidates:
        if ti in taken_text or vi in taken_visual:
            continue
        taken_text.add(ti)
        taken_visual.add(vi)
        te, ve = text_events[ti], visual_events[vi]
        merged.append(
            replace(
                te,
                image_trigger=ve.image_trigger,
                arguments=te.arguments + ve.arguments,
            )
        )

    return MergeResult(
        multimedia=tuple(merged),
        text_only=tuple(
            e for i, e in enumerate(text_events) if i not in taken_text
        ),
        visual_only=tuple(
            e for i, e in enumerate(visual_events) if i not in taken_visual
        ),
        pair_scores=dict(pair_scores),
    )


def merge_multimedia(
    text_events: list[EventMention],
    visual_events: list[EventMention],
    doc: MultimediaDocument,
    scorer: SimilarityScorer,
    cfg: MergeConfig,
) -> MergeResult:
    scores = score_pairs(text_events, visual_events, doc, scorer)
    return merge_from_scores(text_events, visual_events, scores, cfg)
