"""HTTP bridges to process-external generation/scoring/detection services.

Wire contracts (JSON over POST):

* image generator: {prompt, n, size, steps, seed} -> {"images": [base64...]}
* captioner:       {image_ref, p, seed}           -> {"caption": str}
* detector:        {image_ref}                    -> {"objects": [{box, label, score}]}
* scorer:          {sentence_id, words, image_id, image_ref} -> {"score": float}
"""

import base64
import json
import urllib.request

from .augmentation.clients import CaptionRequest, ImageRequest
from .data_model import ImageDoc, ObjectBox, Sentence


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))


class HttpImageGenerator:
    def __init__(self, url: str, tag: str = "http-imagegen", timeout: float = 60.0):
        self.url = url
        self.tag = tag
        self.timeout = timeout

    def generate(self, request: ImageRequest) -> list[bytes]:
        payload = {
            "prompt": request.prompt,
            "n": request.n,
            "size": request.size,
            "steps": request.steps,
            "seed": request.seed,
        }
        out = _post_json(self.url, payload, self.timeout)
        return [base64.b64decode(item) for item in out["images"]]


class HttpCaptioner:
    def __init__(self, url: str, tag: str = "http-captioner", timeout: float = 60.0):
        self.url = url
        self.tag = tag
        self.timeout = timeout

    def caption(self, request: CaptionRequest) -> str:
        payload = {"image_ref": request.image_ref, "p": request.p, "seed": request.seed}
        return str(_post_json(self.url, payload, self.timeout)["caption"])


class HttpDetector:
    def __init__(self, url: str, tag: str = "http-detector", timeout: float = 60.0):
        self.url = url
        self.tag = tag
        self.timeout = timeout

    def detect(self, image: ImageDoc) -> list[ObjectBox]:
        out = _post_json(self.url, {"image_ref": image.source}, self.timeout)
        return [
            ObjectBox(*o["box"], label=o.get("label"), score=o.get("score"))
            for o in out.get("objects", ())
        ]


class HttpScorer:
    def __init__(self, url: str, tag: str = "http-scorer", timeout: float = 60.0):
        self.url = url
        self.tag = tag
        self.timeout = timeout

    def score(self, sentence: Sentence, image: ImageDoc) -> float:
        payload = {
            "sentence_id": sentence.id,
            "words": list(sentence.words),
            "image_id": image.id,
            "image_ref": image.source,
        }
        return float(_post_json(self.url, payload, self.timeout)["score"])
