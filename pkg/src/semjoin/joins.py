"""Tuple, block, adaptive and embedding join operators."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .backends.base import BackendError, CompletionRequest
from .model import Batch, CostParams, Pricing, Table, TokenizerHandle, TokenLedger, count_tokens
from .optimizer import plan_batches
from .prompts import (
    SENTINEL,
    block_prompt,
    block_prompt_skeleton,
    is_yes,
    parse_block_answer,
    tuple_prompt,
)

OPERATORS = ("tuple", "block", "adaptive", "embedding")


class NonConvergence(RuntimeError):
    """The adaptive join still overflowed with the selectivity estimate at 1."""

    def __init__(self, message: str, report: "JoinReport"):
        super().__init__(message)
        self.report = report


class JoinAborted(BackendError):
    """A backend error stopped the join; ``report`` holds the partial result."""

    def __init__(self, message: str, report: "JoinReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class JoinSettings:
    """Execution settings shared by the operators.

    ``token_budget`` is the per-invocation budget net of the static prompt.
    ``static_tokens`` defaults to the backend's own figure, or else to the
    token count of the block-prompt skeleton. ``margin`` inflates estimated
    prompt sizes for backends without exact counts. ``headroom_pairs``
    is passed to :func:`~semjoin.optimizer.plan_batches`.
    """

    token_budget: int = 8192
    static_tokens: int | None = None
    pair_tokens: int = 2
    tokenizer: TokenizerHandle = "chars4"
    margin: float = 1.1
    pricing: Pricing = field(default_factory=Pricing.gpt4)
    sentinel_tokens: int = 1
    headroom_pairs: int = 3

    def __post_init__(self):
        if self.token_budget < 1 or self.pair_tokens < 1 or self.margin < 1 or self.headroom_pairs < 0:
            raise ValueError("invalid join settings")


@dataclass(frozen=True)
class JoinSpec:
    predicate_text: str
    operator: Literal["tuple", "block", "adaptive", "embedding"] = "adaptive"
    batch_sizes: tuple[int, int] | None = None
    e0: float = 1e-5
    alpha: float = 4.0
    symmetric: bool = False

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"operator must be one of {OPERATORS}")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if not 0 < self.e0:
            raise ValueError("e0 must be positive")
        if self.operator == "block" and self.batch_sizes is None:
            raise ValueError("block joins need batch sizes")


@dataclass(frozen=True)
class Attempt:
    estimate: float | None
    b1: int
    b2: int
    outcome: Literal["completed", "overflow"]
    tokens_read: int = 0
    tokens_written: int = 0
    invocations: int = 0

    def token_cost(self, g) -> float:
        return self.tokens_read + g * self.tokens_written


@dataclass
class JoinReport:
    pair_array: np.ndarray
    ledger: TokenLedger
    attempts: list[Attempt] = field(default_factory=list)
    wall_time: float = 0.0
    operator: str = ""
    partial: bool = False

    @property
    def pairs(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.pair_array.tolist()))

    @property
    def pair_count(self) -> int:
        return len(self.pair_array)

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)


@dataclass
class Overflow:
    """A block join stopped at an answer that was cut off before the end marker."""

    ledger: TokenLedger
    batch_index: tuple[int, int]
    b1: int
    b2: int
    pairs_so_far: np.ndarray
    wall_time: float = 0.0


def _pairs(chunks: list[np.ndarray]) -> np.ndarray:
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64, copy=False)


def _stack(ids1: np.ndarray, ids2: np.ndarray) -> np.ndarray:
    return np.stack([ids1, ids2], axis=1) if len(ids1) else np.zeros((0, 2), dtype=np.int64)


def static_tokens(backend, predicate: str, settings: JoinSettings) -> int:
    if settings.static_tokens is not None:
        return settings.static_tokens
    p = getattr(backend, "static_prompt_tokens", None)
    if p is not None:
        return int(p)
    return count_tokens(block_prompt_skeleton(predicate), settings.tokenizer)


# --------------------------------------------------------------------------
# Tuple join
# --------------------------------------------------------------------------

_TUPLE_CHUNK = 1 << 22


def tuple_join(R1: Table, R2: Table, j: str, backend, settings: JoinSettings | None = None) -> JoinReport:
    """One single-token yes/no question per tuple pair."""
    settings = settings or JoinSettings()
    ledger = TokenLedger()
    chunks: list[np.ndarray] = []
    start = time.perf_counter()
    report = JoinReport(np.zeros((0, 2), dtype=np.int64), ledger, operator="tuple")
    try:
        if hasattr(backend, "answer_tuples"):
            right = Batch.of(R2.tuples)
            rows_per_chunk = max(1, _TUPLE_CHUNK // len(R2))
            for left in R1.batches(rows_per_chunk):
                rows, cols, pt, ot, calls = backend.answer_tuples(left, right)
                ledger.record(pt, ot, calls)
                chunks.append(_stack(left.ids[rows], right.ids[cols]))
        else:
            for t1 in R1:
                for t2 in R2:
                    out = backend.complete(CompletionRequest(tuple_prompt(t1, t2, j), 1))
                    ledger.record(out.prompt_tokens, out.output_tokens)
                    if is_yes(out.text):
                        chunks.append(np.array([[t1.id, t2.id]], dtype=np.int64))
    except BackendError as exc:
        report.pair_array, report.partial = _pairs(chunks), True
        report.wall_time = time.perf_counter() - start
        raise JoinAborted(f"tuple join aborted: {exc}", report) from exc
    report.pair_array = _pairs(chunks)
    report.wall_time = time.perf_counter() - start
    return report


# --------------------------------------------------------------------------
# Block join
# --------------------------------------------------------------------------


def block_join(
    R1: Table,
    R2: Table,
    j: str,
    b1: int,
    b2: int,
    backend,
    settings: JoinSettings | None = None,
    *,
    ledger: TokenLedger | None = None,
) -> JoinReport | Overflow:
    """Join batches of ``b1`` and ``b2`` tuples per invocation.

    The trailing batch of each table may be smaller. Returns :class:`Overflow`
    as soon as one answer lacks the end marker.
    """
    settings = settings or JoinSettings()
    if not (1 <= b1 <= len(R1) and 1 <= b2 <= len(R2)):
        raise ValueError(f"batch sizes ({b1}, {b2}) outside [1, {len(R1)}] x [1, {len(R2)}]")
    ledger = ledger if ledger is not None else TokenLedger()
    before = ledger.snapshot()
    p = static_tokens(backend, j, settings)
    t = settings.token_budget
    structured = hasattr(backend, "answer_block")
    exact = structured or bool(getattr(backend, "exact_token_counts", False))
    chunks: list[np.ndarray] = []
    start = time.perf_counter()

    batches2 = R2.batches(b2)
    for x, B1 in enumerate(R1.batches(b1)):
        for y, B2 in enumerate(batches2):
            used = B1.tokens + B2.tokens
            if not exact:
                used = math.ceil((p + used) * settings.margin) - p
            max_out = max(1, t - used)
            try:
                if structured:
                    ans = backend.answer_block(B1, B2, max_out)
                    ledger.record(ans.prompt_tokens, ans.output_tokens)
                    rows, cols, finished = ans.rows, ans.cols, ans.finished
                else:
                    out = backend.complete(CompletionRequest(block_prompt(B1, B2, j), max_out, SENTINEL))
                    ledger.record(out.prompt_tokens, out.output_tokens)
                    parsed = parse_block_answer(out.text, len(B1), len(B2))
                    finished = parsed.finished and not out.truncated
                    idx = np.asarray(parsed.index_pairs, dtype=np.int64).reshape(-1, 2) - 1
                    rows, cols = idx[:, 0], idx[:, 1]
            except BackendError as exc:
                report = JoinReport(_pairs(chunks), ledger, [], time.perf_counter() - start,
                                    "block", partial=True)
                raise JoinAborted(f"block join aborted at batch ({x}, {y}): {exc}", report) from exc
            chunks.append(_stack(B1.ids[rows], B2.ids[cols]))
            if not finished:
                ledger.record_overflow()
                return Overflow(ledger, (x, y), b1, b2, _pairs(chunks), time.perf_counter() - start)

    done = Attempt(None, b1, b2, "completed", ledger.tokens_read - before.tokens_read,
                   ledger.tokens_written - before.tokens_written, ledger.invocations - before.invocations)
    return JoinReport(_pairs(chunks), ledger, [done], time.perf_counter() - start, "block")


# --------------------------------------------------------------------------
# Adaptive join
# --------------------------------------------------------------------------


def join_params(R1: Table, R2: Table, sigma: float, p: int, settings: JoinSettings) -> CostParams:
    """Cost parameters for joining ``R1`` and ``R2`` under selectivity ``sigma``."""
    return CostParams(
        r1=len(R1),
        r2=len(R2),
        s1=float(R1.avg_tuple_tokens),
        s2=float(R2.avg_tuple_tokens),
        s3=settings.pair_tokens,
        sigma=sigma,
        g=settings.pricing.g,
        p=p,
        t=settings.token_budget,
    )


def adaptive_join(
    R1: Table,
    R2: Table,
    j: str,
    e0: float,
    alpha: float,
    backend,
    settings: JoinSettings | None = None,
) -> JoinReport:
    """Block join that grows its selectivity estimate by ``alpha`` after each overflow.

    Each attempt restarts from scratch; tokens spent on failed attempts stay
    in the ledger.
    """
    settings = settings or JoinSettings()
    if e0 <= 0 or alpha <= 1:
        raise ValueError("need e0 > 0 and alpha > 1")
    p = static_tokens(backend, j, settings)
    ledger = TokenLedger()
    attempts: list[Attempt] = []
    start = time.perf_counter()
    e = min(float(e0), 1.0)
    while True:
        b1, b2 = plan_batches(join_params(R1, R2, e, p, settings), sentinel_tokens=settings.sentinel_tokens,
                              headroom_pairs=settings.headroom_pairs)
        before = ledger.snapshot()
        try:
            result = block_join(R1, R2, j, b1, b2, backend, settings, ledger=ledger)
        except JoinAborted as exc:
            exc.report.attempts = list(attempts)
            exc.report.operator = "adaptive"
            raise
        spent = (ledger.tokens_read - before.tokens_read, ledger.tokens_written - before.tokens_written,
                 ledger.invocations - before.invocations)
        if isinstance(result, JoinReport):
            attempts.append(Attempt(e, b1, b2, "completed", *spent))
            return JoinReport(result.pair_array, ledger, attempts, time.perf_counter() - start, "adaptive")
        attempts.append(Attempt(e, b1, b2, "overflow", *spent))
        if e >= 1.0:
            partial = JoinReport(result.pairs_so_far, ledger, attempts, time.perf_counter() - start,
                                 "adaptive", partial=True)
            raise NonConvergence(
                "overflow with selectivity estimate 1; the per-pair output size or the "
                "static prompt size is underestimated",
                partial,
            )
        e = min(e * alpha, 1.0)


# --------------------------------------------------------------------------
# Embedding join
# --------------------------------------------------------------------------


def embedding_join(
    R1: Table,
    R2: Table,
    backend,
    settings: JoinSettings | None = None,
    *,
    symmetric: bool = False,
) -> JoinReport:
    """Pair every tuple of ``R1`` with its most similar tuple of ``R2``.

    Ties go to the lower tuple id. With ``symmetric`` the reverse direction is
    added too. Only input tokens are billed.
    """
    settings = settings or JoinSettings()
    start = time.perf_counter()
    ledger = TokenLedger()
    e1 = backend.embed([t.text for t in R1])
    e2 = backend.embed([t.text for t in R2])
    ledger.record(R1.total_tokens + R2.total_tokens, 0, invocations=2)

    sims = e1 @ e2.T
    order2 = np.argsort(R2.ids, kind="stable")
    best2 = order2[np.argmax(sims[:, order2], axis=1)]
    chunks = [_stack(R1.ids, R2.ids[best2])]
    if symmetric:
        order1 = np.argsort(R1.ids, kind="stable")
        best1 = order1[np.argmax(sims[order1, :], axis=0)]
        chunks.append(_stack(R1.ids[best1], R2.ids))
    pairs = np.unique(_pairs(chunks), axis=0)
    return JoinReport(pairs, ledger, [], time.perf_counter() - start, "embedding")


def run_join(spec: JoinSpec, R1: Table, R2: Table, backend, settings: JoinSettings | None = None,
             embedder=None) -> JoinReport | Overflow:
    """Dispatch on ``spec.operator``."""
    j = spec.predicate_text
    if spec.operator == "tuple":
        return tuple_join(R1, R2, j, backend, settings)
    if spec.operator == "block":
        b1, b2 = spec.batch_sizes
        return block_join(R1, R2, j, min(b1, len(R1)), min(b2, len(R2)), backend, settings)
    if spec.operator == "adaptive":
        return adaptive_join(R1, R2, j, spec.e0, spec.alpha, backend, settings)
    return embedding_join(R1, R2, embedder or backend, settings, symmetric=spec.symmetric)


def ids_valid(report: JoinReport, R1: Table, R2: Table) -> bool:
    a = set(R1.ids.tolist())
    b = set(R2.ids.tolist())
    return all(x in a and y in b for x, y in report.pairs)


def pair_set(pairs: Iterable) -> set[tuple[int, int]]:
    return {(int(a), int(b)) for a, b in pairs}


__all__ = [
    "Attempt",
    "JoinAborted",
    "JoinReport",
    "JoinSettings",
    "JoinSpec",
    "NonConvergence",
    "OPERATORS",
    "Overflow",
    "adaptive_join",
    "block_join",
    "embedding_join",
    "join_params",
    "run_join",
    "static_tokens",
    "tuple_join",
]
