"""Event prompt extraction for text-to-image generation.

The prompt for an event is the shortest contiguous word span of the
trigger's sentence that covers the trigger word and every argument word
grounded in that sentence.
"""

from dataclasses import dataclass

from ..data_model import EventMention, Sentence
from ..errors import ContractError


@dataclass(frozen=True)
class PromptSpan:
    sentence_id: str
    start: int
    end: int  # inclusive
    text: str


def extract_event_prompt(sentence: Sentence, event: EventMention) -> PromptSpan:
    """Shortest contiguous span containing the trigger and all argument words.

    Arguments grounded in other sentences are excluded from the span; the
    extraction always operates within the trigger's sentence.
    """
    if event.text_trigger is None:
        raise ContractError("event has no text trigger")
    trigger_sid, trigger_idx = event.text_trigger
    if trigger_sid != sentence.id:
        raise ContractError(
            f"trigger sentence {trigger_sid!r} does not match {sentence.id!r}"
        )
    if not (0 <= trigger_idx < len(sentence.words)):
        raise ContractError(f"trigger index {trigger_idx} outside sentence")

    lo = hi = trigger_idx
    for arg in event.arguments:
        if arg.text_grounding is None:
            continue
        sid, start, end = arg.text_grounding
        if sid != sentence.id:
            continue
        if not (0 <= start <= end < len(sentence.words)):
            raise ContractError(f"argument span ({start},{end}) outside sentence")
        lo = min(lo, start)
        hi = max(hi, end)

    return PromptSpan(
        sentence_id=sentence.id,
        start=lo,
        end=hi,
        text=" ".join(sentence.words[lo : hi + 1]),
    )
