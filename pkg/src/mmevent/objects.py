"""Object proposals for visual argument identification.

Detection is delegated to a pluggable client (an external detector
service in real runs, a fixture loader at desk scale). During training on
image-annotated data the gold role boxes are used directly; detector
proposals only feed inference.
"""

import json
from typing import Optional, Protocol

from .augmentation.cache import GenerationCache
from .augmentation.clients import call_with_retries
from .data_model import ImageDoc, ObjectBox
from .errors import DetectionError


class ObjectDetectorClient(Protocol):
    tag: str

    def detect(self, image: ImageDoc) -> list[ObjectBox]: ...


def detect(
    image: ImageDoc,
    client: ObjectDetectorClient,
    max_objects: int = 20,
    score_floor: float = 0.25,
    cache: Optional[GenerationCache] = None,
    retry_delay: Optional[float] = None,
) -> list[ObjectBox]:
    """Score-filtered, score-sorted proposals for one image (cached)."""
    params = {"max_objects": max_objects, "score_floor": score_floor}
    if cache is not None:
        key = cache.key_for(image.id, params, client.tag)
        entry = cache.lookup("detections", key)
        if entry is not None:
            raw = json.loads(entry.payload_paths[0].read_bytes().decode("utf-8"))
            return [_box_from_record(r) for r in raw]

    kwargs = {} if retry_delay is None else {"base_delay": retry_delay}
    boxes = call_with_retries(
        lambda: client.detect(image),
        error=DetectionError,
        context=f"object detection on image {image.id!r}",
        **kwargs,
    )
    kept = [b for b in boxes if (b.score or 0.0) >= score_floor]
    kept.sort(key=lambda b: (-(b.score or 0.0), b.x1, b.y1, b.x2, b.y2))
    kept = kept[:max_objects]

    if cache is not None:
        payload = json.dumps([_box_to_record(b) for b in kept]).encode("utf-8")
        cache.store(
            "detections", key, [payload],
            meta={"image_id": image.id, "config": params, "generator_tag": client.tag},
            origin=("detections", image.id, 0),
        )
    return kept


def _box_to_record(b: ObjectBox) -> dict:
    return {"box": [b.x1, b.y1, b.x2, b.y2], "label": b.label, "score": b.score}


def _box_from_record(r: dict) -> ObjectBox:
    return ObjectBox(*r["box"], label=r.get("label"), score=r.get("score"))
