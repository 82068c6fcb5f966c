from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np


class BackendError(RuntimeError):
    pass


class BackendTimeout(BackendError):
    pass


class BackendRejected(BackendError):
    """The provider refused the request (4xx); retrying will not help."""


class CassetteMiss(BackendError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_output_tokens: int
    stop_sequence: str | None = None
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")

    def key(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionOutcome:
    text: str
    prompt_tokens: int
    output_tokens: int
    truncated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be nonnegative")


@runtime_checkable
class CompletionBackend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionOutcome: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vectors / norms
