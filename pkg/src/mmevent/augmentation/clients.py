"""Client contracts for the external generative services.

Real deployments put an HTTP or subprocess bridge behind these
interfaces; deterministic in-process doubles live in `mmevent.fixtures`.
"""

import time
from dataclasses import dataclass
from typing import Callable, Protocol, TypeVar

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.05

T = TypeVar("T")


@dataclass(frozen=True)
class ImageRequest:
    prompt: str
    n: int
    size: int
    steps: int
    seed: int


@dataclass(frozen=True)
class CaptionRequest:
    image_ref: str
    p: float
    seed: int


class ImageGeneratorClient(Protocol):
    tag: str

    def generate(self, request: ImageRequest) -> list[bytes]: ...


class CaptionerClient(Protocol):
    tag: str

    def caption(self, request: CaptionRequest) -> str: ...


def call_with_retries(
    fn: Callable[[], T],
    error: Callable[[str], Exception],
    context: str,
    attempts: int = RETRY_ATTEMPTS,
    base_delay: float = RETRY_BASE_DELAY,
) -> T:
    """Run `fn` with exponential backoff; raise `error` after the last try."""
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except Exception as exc:  # client failures are opaque to us
            last = exc
            if attempt < attempts - 1 and base_delay > 0:
                time.sleep(base_delay * (2**attempt))
    raise error(f"{context}: failed after {attempts} attempts: {last}") from last
