"""Token-cost formulas for the tuple and block join operators.

Everything here is plain arithmetic, so passing :class:`fractions.Fraction`
parameters gives exact results. Costs are in read-token units: one token read
costs 1, one token generated costs ``g``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .model import CostParams, Number


class InfeasibleBatch(ValueError):
    """Batch sizes whose expected prompt plus answer exceeds the budget."""


class DomainError(ValueError):
    """Argument outside the domain of a formula (e.g. at a pole)."""


@dataclass(frozen=True)
class BatchSizes:
    b1: Number
    b2: Number

    def __post_init__(self):
        if self.b1 <= 0 or self.b2 <= 0:
            raise ValueError("batch sizes must be positive")

    @property
    def ib1(self) -> int:
        return max(1, math.floor(self.b1))

    @property
    def ib2(self) -> int:
        return max(1, math.floor(self.b2))

    def token_usage(self, params: CostParams) -> Number:
        """Expected tokens per invocation, static prompt excluded."""
        return self.b1 * params.s1 + self.b2 * params.s2 + self.b1 * self.b2 * params.s3 * params.sigma

    def feasible(self, params: CostParams) -> bool:
        return self.token_usage(params) <= params.t

    def clamped(self, params: CostParams) -> "BatchSizes":
        return BatchSizes(min(self.ib1, params.r1), min(self.ib2, params.r2))


def _sizes(b) -> BatchSizes:
    return b if isinstance(b, BatchSizes) else BatchSizes(*b)


def tuple_pair_cost(params: CostParams) -> Number:
    # static prompt + both tuples read, one answer token written
    return params.p + params.s1 + params.s2 + params.g


def tuple_join_cost(params: CostParams) -> Number:
    return params.r1 * params.r2 * tuple_pair_cost(params)


def block_prompt_size(params: CostParams, b) -> Number:
    """Expected tokens read and written by one block invocation."""
    b = _sizes(b)
    return params.p + b.b1 * params.s1 + b.b2 * params.s2 + b.b1 * b.b2 * params.sigma * params.s3


def block_prompt_cost(params: CostParams, b) -> Number:
    b = _sizes(b)
    return (
        params.p
        + b.b1 * params.s1
        + b.b2 * params.s2
        + b.b1 * b.b2 * params.sigma * params.s3 * params.g
    )


def block_invocations(params: CostParams, b) -> Number:
    b = _sizes(b)
    return _ratio(params.r1, b.b1) * _ratio(params.r2, b.b2)


def block_invocations_int(params: CostParams, b) -> int:
    b = _sizes(b)
    return math.ceil(params.r1 / b.ib1) * math.ceil(params.r2 / b.ib2)


def block_join_cost(params: CostParams, b, *, check: bool = True) -> Number:
    """Continuous total cost ``c(b1, b2)``: invocations times cost per invocation."""
    b = _sizes(b)
    if check and not b.feasible(params):
        raise InfeasibleBatch(
            f"batch ({b.b1}, {b.b2}) needs {b.token_usage(params)} tokens, budget is {params.t}"
        )
    return block_invocations(params, b) * block_prompt_cost(params, b)


def realized_block_cost(params: CostParams, b1: int, b2: int, *, sentinel_tokens: int = 1) -> Number:
    """Ledger cost of running the block join with integer batch sizes.

    Assumes constant tuple sizes and exactly ``sigma * r1 * r2`` result pairs.
    With ``n1`` and ``n2`` batches, every table-1 batch is read once per
    table-2 batch and vice versa, so the cost depends on the batch counts only.
    """
    n1 = math.ceil(params.r1 / b1)
    n2 = math.ceil(params.r2 / b2)
    reads = n1 * n2 * params.p + n2 * params.r1 * params.s1 + n1 * params.r2 * params.s2
    writes = n1 * n2 * sentinel_tokens + params.sigma * params.r1 * params.r2 * params.s3
    return reads + params.g * writes


def cstar(params: CostParams, b1: Number) -> Number:
    """Cost as a function of ``b1`` when ``b2`` saturates the token budget."""
    if b1 <= 0:
        raise DomainError("b1 must be positive")
    if b1 * params.s1 >= params.t:
        raise DomainError(f"b1={b1} leaves no budget for table 2 (t={params.t}, s1={params.s1})")
    s1, s2, s3, sig, p, t, g = params.s1, params.s2, params.s3, params.sigma, params.p, params.t, params.g
    return params.r1 * params.r2 * (
        (s2 / b1 + s3 * sig) * (p + b1 * s1) / (t - b1 * s1) + s2 / b1 + s3 * sig * g
    )


def _ratio(a, b):
    # keep integer ratios exact so Fraction-valued params stay exact end to end
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


__all__ = [
    "BatchSizes",
    "DomainError",
    "InfeasibleBatch",
    "block_invocations",
    "block_invocations_int",
    "block_join_cost",
    "block_prompt_cost",
    "block_prompt_size",
    "cstar",
    "realized_block_cost",
    "tuple_join_cost",
    "tuple_pair_cost",
]
