"""Deterministic stand-in for a language model.

Match decisions come from a *match oracle*; answers are produced by
enumerating oracle matches and spending ``s3`` output tokens per pair, so
token usage is exactly what the cost model assumes.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .. import kernels
from ..model import Batch, Table, Tuple
from ..prompts import (
    PromptFormatError,
    render_block_answer,
    split_block_prompt,
    split_tuple_prompt,
)
from .base import BackendRejected, CompletionOutcome, CompletionRequest, normalize_rows


def _as_batch(seq) -> Batch:
    return seq if isinstance(seq, Batch) else Batch.of(seq)


def _seed_floats(seed: int, n: int) -> np.ndarray:
    return np.random.default_rng(seed).random(n)


# --------------------------------------------------------------------------
# Match oracles
# --------------------------------------------------------------------------


class MatchOracle:
    """Deterministic predicate over tuple pairs.

    Subclasses implement :meth:`block`, which returns the local positions of
    all matching pairs in row-major order.
    """

    def block(self, batch1: Batch, batch2: Batch) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def __call__(self, t1: Tuple, t2: Tuple) -> bool:
        rows, _ = self.block(Batch.of([t1]), Batch.of([t2]))
        return len(rows) > 0

    def truth(self, table1: Table, table2: Table) -> set[tuple[int, int]]:
        rows, cols = self.block(Batch.of(table1.tuples), Batch.of(table2.tuples))
        return set(zip(table1.ids[rows].tolist(), table2.ids[cols].tolist()))


class LatticeOracle(MatchOracle):
    """Constant-selectivity oracle keyed on tuple ids.

    Any rectangle of consecutive ids contains almost exactly ``sigma`` times
    its area in matches, which is what the block-join cost model assumes.
    """

    def __init__(self, sigma: float, seed: int = 0):
        if not 0 <= sigma <= 1:
            raise ValueError("sigma must lie in [0, 1]")
        self.sigma = float(sigma)
        self.seed = seed
        self.phase1, self.phase2 = (float(x) for x in _seed_floats(seed, 2))

    def block(self, batch1, batch2):
        return kernels.lattice_pairs(batch1.ids, batch2.ids, self.sigma, self.phase1, self.phase2)


class HashOracle(MatchOracle):
    """Every pair matches independently with probability ``sigma``."""

    def __init__(self, sigma: float, seed: int = 0):
        if not 0 <= sigma <= 1:
            raise ValueError("sigma must lie in [0, 1]")
        self.sigma = float(sigma)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def block(self, batch1, batch2):
        return kernels.hash_pairs(batch1.ids, batch2.ids, self.sigma, self.seed)


class PairSetOracle(MatchOracle):
    """Matches exactly the given ``(id1, id2)`` pairs, e.g. a ground truth."""

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        self.pairs = frozenset((int(a), int(b)) for a, b in pairs)
        self._right: dict[int, set[int]] = {}
        for a, b in self.pairs:
            self._right.setdefault(a, set()).add(b)

    def __call__(self, t1, t2):
        return (t1.id, t2.id) in self.pairs

    def block(self, batch1, batch2):
        col_of = {int(i): k for k, i in enumerate(batch2.ids)}
        rows, cols = [], []
        for r, id1 in enumerate(batch1.ids.tolist()):
            hits = self._right.get(id1)
            if not hits:
                continue
            found = sorted(col_of[b] for b in hits if b in col_of)
            rows.extend([r] * len(found))
            cols.extend(found)
        return np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)


class PredicateOracle(MatchOracle):
    """Wraps an arbitrary deterministic ``fn(t1, t2) -> bool``."""

    def __init__(self, fn: Callable[[Tuple, Tuple], bool]):
        self.fn = fn

    def __call__(self, t1, t2):
        return bool(self.fn(t1, t2))

    def block(self, batch1, batch2):
        hits = [(i, j) for i, a in enumerate(batch1) for j, b in enumerate(batch2) if self.fn(a, b)]
        if not hits:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        arr = np.asarray(hits, dtype=np.int64)
        return arr[:, 0], arr[:, 1]


# --------------------------------------------------------------------------
# Simulated completion backend
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatedWorld:
    match_oracle: MatchOracle
    per_pair_output_tokens: int = 2
    token_budget: int = 8192
    static_prompt_tokens: int = 0
    sentinel_tokens: int = 1

    def __post_init__(self):
        if self.per_pair_output_tokens < 1:
            raise ValueError("per_pair_output_tokens must be >= 1")
        if self.token_budget < 1 or self.static_prompt_tokens < 0:
            raise ValueError("invalid token budget")


@dataclass(frozen=True)
class BlockAnswer:
    """Structured answer to one block invocation; positions are 0-based."""

    rows: np.ndarray
    cols: np.ndarray
    n_matches: int
    finished: bool
    prompt_tokens: int
    output_tokens: int

    @property
    def truncated(self) -> bool:
        return not self.finished

    def text(self) -> str:
        pairs = zip((self.rows + 1).tolist(), (self.cols + 1).tolist())
        return render_block_answer(list(pairs), self.finished)

    def outcome(self) -> CompletionOutcome:
        return CompletionOutcome(self.text(), self.prompt_tokens, self.output_tokens, self.truncated)


def _answer_block(world: SimulatedWorld, b1: Batch, b2: Batch, max_output_tokens: int) -> BlockAnswer:
    rows, cols = world.match_oracle.block(b1, b2)
    n = len(rows)
    k, finished = kernels.emitted_prefix(
        n, world.per_pair_output_tokens, max_output_tokens, world.sentinel_tokens
    )
    if finished:
        out = n * world.per_pair_output_tokens + world.sentinel_tokens
    else:
        out = max_output_tokens
    return BlockAnswer(
        rows[:k],
        cols[:k],
        n,
        bool(finished),
        world.static_prompt_tokens + b1.tokens + b2.tokens,
        int(out),
    )


def simulate_block_answer(
    world: SimulatedWorld, batch1: Sequence[Tuple], batch2: Sequence[Tuple], max_output_tokens: int
) -> CompletionOutcome:
    """Answer a block prompt: all matching pairs in row-major order, then the end marker.

    When the pairs and marker don't fit ``max_output_tokens`` the longest
    prefix of pairs is emitted and the outcome is truncated.
    """
    if not len(batch1) or not len(batch2):
        raise ValueError("batches must be non-empty")
    if max_output_tokens < 1:
        raise ValueError("max_output_tokens must be >= 1")
    return _answer_block(world, _as_batch(batch1), _as_batch(batch2), max_output_tokens).outcome()


class SimulatedBackend:
    """Completion backend driven by a :class:`SimulatedWorld`.

    Joins use the structured entry points (:meth:`answer_block`,
    :meth:`answer_tuples`), which never build prompt text. :meth:`complete`
    accepts real prompt text for tuples it has seen via :meth:`register`.
    Reported prompt sizes are the static size plus the tuple sizes, as a
    provider usage report would give them.
    """

    exact_token_counts = True

    def __init__(self, world: SimulatedWorld, tables: Iterable[Table] = ()):
        self.world = world
        self.calls = 0
        self._by_text: dict[str, Tuple] = {}
        for t in tables:
            self.register(t)

    @property
    def static_prompt_tokens(self) -> int:
        return self.world.static_prompt_tokens

    def register(self, table: Table) -> None:
        for t in table:
            self._by_text.setdefault(t.text, t)

    def _check_prompt(self, prompt_tokens: int) -> None:
        limit = self.world.static_prompt_tokens + self.world.token_budget
        if prompt_tokens > limit:
            raise BackendRejected(f"prompt of {prompt_tokens} tokens exceeds the context window of {limit}")

    # structured entry points ------------------------------------------------

    def answer_block(self, batch1: Batch, batch2: Batch, max_output_tokens: int) -> BlockAnswer:
        if max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        self._check_prompt(self.world.static_prompt_tokens + batch1.tokens + batch2.tokens)
        self.calls += 1
        return _answer_block(self.world, batch1, batch2, max_output_tokens)

    def answer_tuples(self, batch1: Batch, batch2: Batch) -> tuple[np.ndarray, np.ndarray, int, int, int]:
        """One single-token tuple prompt per pair of ``batch1 x batch2``.

        Returns matching ``(rows, cols)``, total prompt tokens, total output
        tokens and the number of invocations.
        """
        n1, n2 = len(batch1), len(batch2)
        p = self.world.static_prompt_tokens
        self._check_prompt(p + max(t.token_size for t in batch1) + max(t.token_size for t in batch2))
        rows, cols = self.world.match_oracle.block(batch1, batch2)
        n = n1 * n2
        self.calls += n
        return rows, cols, n * p + n2 * batch1.tokens + n1 * batch2.tokens, n, n

    # raw-text path ----------------------------------------------------------

    def _lookup(self, texts: Sequence[str]) -> Batch:
        try:
            return Batch.of([self._by_text[s] for s in texts])
        except KeyError as exc:
            raise BackendRejected(f"simulated backend does not know tuple text {exc.args[0]!r}") from None

    def complete(self, request: CompletionRequest) -> CompletionOutcome:
        try:
            _, text1, text2 = split_tuple_prompt(request.prompt)
        except PromptFormatError:
            pass
        else:
            b1, b2 = self._lookup([text1]), self._lookup([text2])
            prompt_tokens = self.world.static_prompt_tokens + b1.tokens + b2.tokens
            self._check_prompt(prompt_tokens)
            self.calls += 1
            hit = self.world.match_oracle(b1[0], b2[0])
            return CompletionOutcome("Yes" if hit else "No", prompt_tokens, 1)
        try:
            texts1, texts2 = split_block_prompt(request.prompt)
        except PromptFormatError as exc:
            raise BackendRejected(f"unrecognized prompt: {exc}") from None
        return self.answer_block(self._lookup(texts1), self._lookup(texts2), request.max_output_tokens).outcome()


# --------------------------------------------------------------------------
# Simulated embeddings
# --------------------------------------------------------------------------


@dataclass
class HashEmbeddingBackend:
    """Pseudo-random unit vectors derived from a hash of each text.

    ``overrides`` pins the vector of specific texts, which tests use to
    construct known similarity structures.
    """

    dim: int = 64
    seed: int = 0
    overrides: Mapping[str, Sequence[float]] = field(default_factory=dict)
    calls: int = 0

    def _vector(self, text: str) -> np.ndarray:
        if text in self.overrides:
            v = np.asarray(self.overrides[text], dtype=np.float64)
            if v.shape != (self.dim,):
                raise ValueError(f"override for {text!r} has shape {v.shape}, expected ({self.dim},)")
            return v
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            raise ValueError("nothing to embed")
        self.calls += 1
        return normalize_rows(np.stack([self._vector(t) for t in texts]))


__all__ = [
    "BlockAnswer",
    "HashEmbeddingBackend",
    "HashOracle",
    "LatticeOracle",
    "MatchOracle",
    "PairSetOracle",
    "PredicateOracle",
    "SimulatedBackend",
    "SimulatedWorld",
    "simulate_block_answer",
]
