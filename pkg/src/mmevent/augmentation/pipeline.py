"""Cross-modality augmentation: generate the missing modality and cache it."""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

from ..data_model import ImageDoc, MultimediaDocument
from ..errors import CaptioningError, ContractError, GenerationError
from .cache import GenerationCache
from .clients import (
    CaptionRequest,
    CaptionerClient,
    ImageGeneratorClient,
    ImageRequest,
    call_with_retries,
)
from .prompts import PromptSpan, extract_event_prompt

log = logging.getLogger(__name__)

IMAGE_MODALITY = "generated-image"
CAPTION_MODALITY = "generated-caption"


@dataclass(frozen=True)
class GenerationConfig:
    images_per_event: int = 4
    image_size: int = 512
    denoise_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.images_per_event < 1:
            raise ContractError("images_per_event must be >= 1")
        if self.image_size <= 0:
            raise ContractError("image_size must be positive")


@dataclass(frozen=True)
class NucleusConfig:
    p: float = 0.9
    captions_per_image: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ContractError("p must be in (0, 1]")
        if self.captions_per_image < 1:
            raise ContractError("captions_per_image must be >= 1")


@dataclass(frozen=True)
class GeneratedPair:
    origin: tuple[str, str, int]  # (dataset, record id, event index)
    modality: str
    payload: str  # image payload path, or the caption text
    prompt: str  # prompt-span text, or the source image id
    generator_tag: str


def generate_images(
    prompt: PromptSpan,
    cfg: GenerationConfig,
    client: ImageGeneratorClient,
    cache: GenerationCache,
    origin: tuple[str, str, int],
    retry_delay: Optional[float] = None,
) -> list[GeneratedPair]:
    """Generate `cfg.images_per_event` images for one event prompt.

    A repeat call with the same (prompt text, config, generator tag) is a
    pure cache hit and performs zero client invocations.
    """
    key = cache.key_for(prompt.text, asdict(cfg), client.tag)
    entry = cache.lookup(IMAGE_MODALITY, key)
    if entry is not None:
        cache.record_origin(IMAGE_MODALITY, key, client.tag, origin)
    else:
        request = ImageRequest(
            prompt=prompt.text,
            n=cfg.images_per_event,
            size=cfg.image_size,
            steps=cfg.denoise_steps,
            seed=cfg.seed,
        )
        payloads = _generate_with_retries(client, request, retry_delay)
        entry = cache.store(
            IMAGE_MODALITY,
            key,
            payloads,
            meta={
                "prompt": prompt.text,
                "config": asdict(cfg),
                "generator_tag": client.tag,
                "origin": list(origin),
            },
            origin=origin,
        )
    return [
        GeneratedPair(
            origin=origin,
            modality=IMAGE_MODALITY,
            payload=str(path),
            prompt=prompt.text,
            generator_tag=client.tag,
        )
        for path in entry.payload_paths
    ]


def _generate_with_retries(client, request: ImageRequest, retry_delay):
    """Batched generation; missing indices of a partial batch are refilled."""
    kwargs = {} if retry_delay is None else {"base_delay": retry_delay}
    collected: dict[int, bytes] = {}

    def attempt() -> list[bytes]:
        got = client.generate(request)
        for i, blob in enumerate(got[: request.n]):
            collected.setdefault(i, blob)
        if len(collected) < request.n:
            raise GenerationError(
                f"partial batch: {len(collected)}/{request.n} images"
            )
        return [collected[i] for i in range(request.n)]

    return call_with_retries(
        attempt,
        error=GenerationError,
        context=f"image generation for prompt {request.prompt!r}",
        **kwargs,
    )


def generate_caption(
    image: ImageDoc,
    cfg: NucleusConfig,
    client: CaptionerClient,
    cache: GenerationCache,
    origin: tuple[str, str, int],
    retry_delay: Optional[float] = None,
) -> list[GeneratedPair]:
    """Generate `cfg.captions_per_image` captions for one image (cached)."""
    kwargs = {} if retry_delay is None else {"base_delay": retry_delay}
    key = cache.key_for(image.id, asdict(cfg), client.tag)
    entry = cache.lookup(CAPTION_MODALITY, key)
    if entry is not None:
        cache.record_origin(CAPTION_MODALITY, key, client.tag, origin)
    else:
        captions = []
        for i in range(cfg.captions_per_image):
            caption = call_with_retries(
                lambda i=i: client.caption(
                    CaptionRequest(image_ref=image.source, p=cfg.p, seed=cfg.seed + i)
                ),
                error=CaptioningError,
                context=f"captioning image {image.id!r}",
                **kwargs,
            )
            if not caption.strip():
                # One regeneration with a shifted seed before giving up.
                caption = call_with_retries(
                    lambda i=i: client.caption(
                        CaptionRequest(
                            image_ref=image.source,
                            p=cfg.p,
                            seed=cfg.seed + i + 1000003,
                        )
                    ),
                    error=CaptioningError,
                    context=f"re-captioning image {image.id!r}",
                    **kwargs,
                )
                if not caption.strip():
                    raise CaptioningError(
                        f"captioner produced an empty caption for {image.id!r}"
                    )
            captions.append(caption)
        entry = cache.store(
            CAPTION_MODALITY,
            key,
            [c.encode("utf-8") for c in captions],
            meta={
                "image_id": image.id,
                "config": asdict(cfg),
                "generator_tag": client.tag,
                "origin": list(origin),
            },
            origin=origin,
        )
    return [
        GeneratedPair(
            origin=origin,
            modality=CAPTION_MODALITY,
            payload=path.read_bytes().decode("utf-8"),
            prompt=image.id,
            generator_tag=client.tag,
        )
        for path in entry.payload_paths
    ]


def augment_text_dataset(
    docs: list[MultimediaDocument],
    cfg: GenerationConfig,
    client: ImageGeneratorClient,
    cache: GenerationCache,
    dataset_name: str,
    retry_delay: Optional[float] = None,
) -> int:
    """Generate images for every gold textual event; returns pair count."""
    produced = 0
    for doc in docs:
        for k, event in enumerate(doc.gold_events):
            if event.text_trigger is None:
                continue
            sentence = doc.sentence(event.text_trigger[0])
            if sentence is None:
                raise ContractError(
                    f"doc {doc.id}: trigger sentence {event.text_trigger[0]!r} missing"
                )
            prompt = extract_event_prompt(sentence, event)
            pairs = generate_images(
                prompt, cfg, client, cache,
                origin=(dataset_name, doc.id, k),
                retry_delay=retry_delay,
            )
            produced += len(pairs)
    log.info("augmented %d text docs with %d generated images", len(docs), produced)
    return produced


def augment_image_dataset(
    docs: list[MultimediaDocument],
    cfg: NucleusConfig,
    client: CaptionerClient,
    cache: GenerationCache,
    dataset_name: str,
    retry_delay: Optional[float] = None,
) -> int:
    """Generate captions for every image; returns pair count."""
    produced = 0
    for doc in docs:
        for j, image in enumerate(doc.images):
            pairs = generate_caption(
                image, cfg, client, cache,
                origin=(dataset_name, image.id, j),
                retry_delay=retry_delay,
            )
            produced += len(pairs)
    log.info("augmented %d image docs with %d captions", len(docs), produced)
    return produced
