from .prompts import PromptSpan, extract_event_prompt
from .nucleus import nucleus_filter, nucleus_sample
from .clients import (
    CaptionRequest,
    CaptionerClient,
    ImageGeneratorClient,
    ImageRequest,
    call_with_retries,
)
from .cache import CacheEntry, GenerationCache
from .pipeline import (
    GeneratedPair,
    GenerationConfig,
    NucleusConfig,
    augment_image_dataset,
    augment_text_dataset,
    generate_caption,
    generate_images,
)
from .batches import AugmentationPool, TextContextExample, assemble_text_batch

__all__ = [
    "AugmentationPool",
    "CacheEntry",
    "CaptionRequest",
    "CaptionerClient",
    "GeneratedPair",
    "GenerationCache",
    "GenerationConfig",
    "ImageGeneratorClient",
    "ImageRequest",
    "NucleusConfig",
    "PromptSpan",
    "TextContextExample",
    "assemble_text_batch",
    "augment_image_dataset",
    "augment_text_dataset",
    "call_with_retries",
    "extract_event_prompt",
    "generate_caption",
    "generate_images",
    "nucleus_filter",
    "nucleus_sample",
]
