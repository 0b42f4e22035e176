"""Assemble per-sentence image contexts from the augmentation cache."""

from dataclasses import dataclass

import numpy as np

from ..data_model import MultimediaDocument, Sentence
from ..errors import AssemblyError
from ..seeding import stable_seed
from .cache import GenerationCache
from .pipeline import CAPTION_MODALITY, IMAGE_MODALITY


@dataclass(frozen=True)
class AugmentationPool:
    """Snapshot of the cache contents, indexed for batch assembly."""

    images_by_event: dict[tuple[str, int], tuple[str, ...]]  # (doc id, event idx)
    captions_by_image: dict[str, tuple[str, ...]]

    @classmethod
    def from_cache(cls, cache: GenerationCache) -> "AugmentationPool":
        images: dict[tuple[str, int], tuple[str, ...]] = {}
        captions: dict[str, tuple[str, ...]] = {}
        for entry_meta in cache.manifest_entries():
            origin = entry_meta.get("origin")
            modality = entry_meta["modality"]
            entry = cache.lookup(modality, entry_meta["key"])
            if entry is None or origin is None:
                continue
            if modality == IMAGE_MODALITY:
                _, record_id, event_idx = origin
                images[(record_id, int(event_idx))] = tuple(
                    str(p) for p in entry.payload_paths
                )
            elif modality == CAPTION_MODALITY:
                _, image_id, _ = origin
                captions[image_id] = tuple(
                    p.read_bytes().decode("utf-8") for p in entry.payload_paths
                )
        return cls(images_by_event=images, captions_by_image=captions)

    @property
    def total_images(self) -> int:
        return sum(len(v) for v in self.images_by_event.values())


@dataclass(frozen=True)
class TextContextExample:
    doc_id: str
    sentence_id: str
    positives: tuple[str, ...]  # generated-image payload paths
    negatives: tuple[str, ...]


def assemble_text_batch(
    doc: MultimediaDocument,
    sentence: Sentence,
    pool: AugmentationPool,
    neg_k: int,
    seed: int,
) -> TextContextExample:
    """Build the image context for one sentence.

    Sentences with events get their own events' generated images plus
    `neg_k` seeded negatives drawn from other events; event-less sentences
    get `neg_k` random generated images from other text. Pure function of
    (doc, pool snapshot, neg_k, seed).
    """
    own_keys = []
    for k, event in enumerate(doc.gold_events):
        if event.text_trigger is not None and event.text_trigger[0] == sentence.id:
            own_keys.append((doc.id, k))

    positives: list[str] = []
    for key in own_keys:
        if key not in pool.images_by_event:
            raise AssemblyError(
                f"no generated images for doc {key[0]!r} event {key[1]}; "
                f"run the augment step first"
            )
        positives.extend(pool.images_by_event[key])

    own = set(own_keys)
    candidates = [
        path
        for key in sorted(pool.images_by_event)
        if key not in own
        for path in pool.images_by_event[key]
    ]
    if not candidates and neg_k > 0:
        raise AssemblyError("augmentation pool has no images from other events")

    rng = np.random.default_rng(stable_seed("neg", seed, doc.id, sentence.id))
    take = min(neg_k, len(candidates))
    chosen = rng.choice(len(candidates), size=take, replace=False) if take else []
    negatives = tuple(candidates[int(i)] for i in sorted(chosen))

    return TextContextExample(
        doc_id=doc.id,
        sentence_id=sentence.id,
        positives=tuple(positives),
        negatives=negatives,
    )
