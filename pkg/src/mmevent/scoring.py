"""Precision/recall/F1 scoring of event predictions against gold.

Events are scored in three category views — textual (events with a text
trigger, text-grounded arguments), visual (image trigger, box-grounded
arguments) and multimedia (both triggers, all arguments) — each for
mentions and arguments. Mentions match on event type plus trigger
grounding; arguments of matched mentions match on role plus grounding
(exact span offsets for text, IoU >= 0.5 against any gold box for
visual). Matching is one-to-one with maximum cardinality, computed by
augmenting paths in deterministic list order.
"""

from dataclasses import dataclass, replace

from .data_model import ArgumentMention, EventMention, ObjectBox
from .errors import ContractError

CATEGORIES = ("textual", "visual", "multimedia")
LEVELS = ("mention", "argument")


def iou(a: ObjectBox, b: ObjectBox) -> float:
    """Intersection-over-union in pixel area with inclusive coordinates."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1) + 1
    iy = min(a.y2, b.y2) - max(a.y1, b.y1) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a.x2 - a.x1 + 1) * (a.y2 - a.y1 + 1)
    area_b = (b.x2 - b.x1 + 1) * (b.y2 - b.y1 + 1)
    return inter / (area_a + area_b - inter)


@dataclass
class CategoryScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        total = self.tp + self.fp
        return self.tp / total if total else 0.0

    @property
    def recall(self) -> float:
        total = self.tp + self.fn
        return self.tp / total if total else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0

    def add(self, other: "CategoryScore") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass
class ScoreReport:
    scores: dict[str, CategoryScore]

    @staticmethod
    def empty() -> "ScoreReport":
        return ScoreReport(
            scores={
                f"{cat}-{level}": CategoryScore()
                for cat in CATEGORIES
                for level in LEVELS
            }
        )

    def add(self, other: "ScoreReport") -> None:
        for key, score in other.scores.items():
            self.scores[key].add(score)

    def to_dict(self) -> dict:
        return {
            key: {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "tp": s.tp,
                "fp": s.fp,
                "fn": s.fn,
            }
            for key, s in self.scores.items()
        }

    @staticmethod
    def from_dict(raw: dict) -> "ScoreReport":
        report = ScoreReport.empty()
        for key, s in raw.items():
            report.scores[key] = CategoryScore(tp=s["tp"], fp=s["fp"], fn=s["fn"])
        return report


# ---------------------------------------------------------------------------
# matching


def max_matching(n_left: int, n_right: int, adj: list[list[int]]) -> list[int]:
    """Maximum bipartite matching via augmenting paths.

    `adj[i]` lists the right nodes compatible with left node `i`. Returns
    the right partner of each left node (-1 if unmatched). Deterministic
    given adjacency order.
    """
    match_right = [-1] * n_right

    def augment(i: int, visited: list[bool]) -> bool:
        for j in adj[i]:
            if visited[j]:
                continue
            visited[j] = True
            if match_right[j] == -1 or augment(match_right[j], visited):
                match_right[j] = i
                return True
        return False

    for i in range(n_left):
        augment(i, [False] * n_right)

    match_left = [-1] * n_left
    for j, i in enumerate(match_right):
        if i != -1:
            match_left[i] = j
    return match_left


def _mention_matches(gold: EventMention, pred: EventMention, category: str) -> bool:
    if gold.event_type != pred.event_type:
        return False
    if category in ("textual", "multimedia") and gold.text_trigger != pred.text_trigger:
        return False
    if category in ("visual", "multimedia") and gold.image_trigger != pred.image_trigger:
        return False
    return True


def _argument_matches(
    gold: ArgumentMention, pred: ArgumentMention, iou_threshold: float
) -> bool:
    if gold.role != pred.role:
        return False
    if (gold.text_grounding is None) != (pred.text_grounding is None):
        return False
    if gold.text_grounding is not None and gold.text_grounding != pred.text_grounding:
        return False
    if bool(gold.visual_grounding) != bool(pred.visual_grounding):
        return False
    if gold.visual_grounding:
        hit = any(
            g_img == p_img and iou(g_box, p_box) >= iou_threshold
            for g_img, g_box in gold.visual_grounding
            for p_img, p_box in pred.visual_grounding
        )
        if not hit:
            return False
    return True


def _category_view(events, category: str) -> list[EventMention]:
    """Restrict events and their arguments to one category's modality."""
    out = []
    for e in events:
        if category == "textual":
            if e.text_trigger is None:
                continue
            args = tuple(a for a in e.arguments if a.text_grounding is not None)
            args = tuple(replace(a, visual_grounding=()) for a in args)
        elif category == "visual":
            if e.image_trigger is None:
                continue
            args = tuple(a for a in e.arguments if a.visual_grounding)
            args = tuple(replace(a, text_grounding=None) for a in args)
        else:
            if e.text_trigger is None or e.image_trigger is None:
                continue
            args = e.arguments
        out.append(replace(e, arguments=args))
    return out


def score_events(
    gold: list[EventMention],
    pred: list[EventMention],
    iou_threshold: float = 0.5,
) -> ScoreReport:
    """Score one document's predictions against its gold events."""
    report = ScoreReport.empty()
    for category in CATEGORIES:
        g_view = _category_view(gold, category)
        p_view = _category_view(pred, category)

        adj = [
            [j for j, g in enumerate(g_view) if _mention_matches(g, p, category)]
            for p in p_view
        ]
        match = max_matching(len(p_view), len(g_view), adj)
        mention_tp = sum(1 for j in match if j != -1)
        report.scores[f"{category}-mention"] = CategoryScore(
            tp=mention_tp,
            fp=len(p_view) - mention_tp,
            fn=len(g_view) - mention_tp,
        )

        arg_tp = 0
        total_pred_args = sum(len(p.arguments) for p in p_view)
        total_gold_args = sum(len(g.arguments) for g in g_view)
        for i, j in enumerate(match):
            if j == -1:
                continue
            p_args = p_view[i].arguments
            g_args = g_view[j].arguments
            arg_adj = [
                [
                    b
                    for b, g_arg in enumerate(g_args)
                    if _argument_matches(g_arg, p_arg, iou_threshold)
                ]
                for p_arg in p_args
            ]
            arg_match = max_matching(len(p_args), len(g_args), arg_adj)
            arg_tp += sum(1 for b in arg_match if b != -1)
        report.scores[f"{category}-argument"] = CategoryScore(
            tp=arg_tp,
            fp=total_pred_args - arg_tp,
            fn=total_gold_args - arg_tp,
        )
    return report


def score_documents(
    pairs: list[tuple[list[EventMention], list[EventMention]]],
    iou_threshold: float = 0.5,
) -> ScoreReport:
    """Sum per-document scores; `pairs` holds (gold, pred) per document."""
    if not isinstance(pairs, list):
        raise ContractError("score_documents expects a list of (gold, pred) pairs")
    report = ScoreReport.empty()
    for gold, pred in pairs:
        report.add(score_events(gold, pred, iou_threshold))
    return report
