from .base import (
    BackendError,
    BackendRejected,
    BackendTimeout,
    CassetteMiss,
    CompletionBackend,
    CompletionOutcome,
    CompletionRequest,
    EmbeddingBackend,
)
from .http import HttpBackend, HttpConfig
from .replay import RecordReplayBackend, record_replay
from .simulated import (
    BlockAnswer,
    HashEmbeddingBackend,
    HashOracle,
    LatticeOracle,
    MatchOracle,
    PairSetOracle,
    PredicateOracle,
    SimulatedBackend,
    SimulatedWorld,
    simulate_block_answer,
)


def complete(backend, request: CompletionRequest) -> CompletionOutcome:
    return backend.complete(request)


def embed(backend, texts):
    return backend.embed(texts)


__all__ = [
    "BackendError",
    "BackendRejected",
    "BackendTimeout",
    "BlockAnswer",
    "CassetteMiss",
    "CompletionBackend",
    "CompletionOutcome",
    "CompletionRequest",
    "EmbeddingBackend",
    "HashEmbeddingBackend",
    "HashOracle",
    "HttpBackend",
    "HttpConfig",
    "LatticeOracle",
    "MatchOracle",
    "PairSetOracle",
    "PredicateOracle",
    "RecordReplayBackend",
    "SimulatedBackend",
    "SimulatedWorld",
    "complete",
    "embed",
    "record_replay",
    "simulate_block_answer",
]
