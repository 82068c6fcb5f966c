"""Batch-size optimization for the block join under a known selectivity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import DomainError, block_invocations, block_join_cost, realized_block_cost
from .model import CostParams, Number

_EPS = 1e-9


class InfeasibleBudget(ValueError):
    """Not even one tuple per table (plus its possible output) fits the budget."""


@dataclass(frozen=True)
class OptimizerResult:
    b1_star: float
    b2_star: float
    ib1: int
    ib2: int
    predicted_cost: float
    predicted_invocations: float
    integer_cost: float

    def as_dict(self) -> dict:
        return {
            "b1_star": self.b1_star,
            "b2_star": self.b2_star,
            "ib1": self.ib1,
            "ib2": self.ib2,
            "predicted_cost": self.predicted_cost,
            "predicted_invocations": self.predicted_invocations,
            "integer_cost": self.integer_cost,
        }


def _check_budget(params: CostParams) -> None:
    if not params.fits_one_pair:
        raise InfeasibleBudget(
            f"budget t={params.t} cannot hold one tuple from each table "
            f"({params.s1} + {params.s2} + {params.sigma}*{params.s3} tokens)"
        )


def b2_of_b1(params: CostParams, b1: Number) -> Number:
    """Largest ``b2`` that fits the budget for a given ``b1``."""
    if b1 <= 0:
        raise DomainError("b1 must be positive")
    rest = params.t - b1 * params.s1
    if rest < 0:
        raise DomainError(f"b1={b1} alone exceeds the budget t={params.t}")
    return rest / (params.s2 + b1 * params.s3 * params.sigma)


def _b1_of_b2(params: CostParams, b2: Number) -> Number:
    return (params.t - b2 * params.s2) / (params.s1 + b2 * params.s3 * params.sigma)


def optimal_b1(params: CostParams) -> float:
    """Continuous minimizer of the saturated-budget cost.

    Uses the rationalized root ``s2*t / (sqrt(s1^2 s2^2 + s1 s2 s3 sigma t) + s1 s2)``,
    which is stable for tiny selectivities and gives ``t / (2 s1)`` at zero.
    """
    s1, s2, s3, sig, t = (float(x) for x in (params.s1, params.s2, params.s3, params.sigma, params.t))
    root = math.sqrt(s1 * s1 * s2 * s2 + s1 * s2 * s3 * sig * t)
    return s2 * t / (root + s1 * s2)


def optimal_b1_closed_form(params: CostParams) -> float:
    """The unrationalized quadratic root; undefined at zero selectivity."""
    s1, s2, s3, sig, t = (float(x) for x in (params.s1, params.s2, params.s3, params.sigma, params.t))
    if sig == 0:
        raise DomainError("closed form is 0/0 at zero selectivity")
    return (-s1 * s2 + math.sqrt(s1 * s1 * s2 * s2 + s1 * s2 * s3 * sig * t)) / (s1 * s3 * sig)


def derivative_cstar(params: CostParams, b1: Number) -> Number:
    """First derivative of the saturated-budget cost with respect to ``b1``."""
    s1, s2, s3, sig, t, p = params.s1, params.s2, params.s3, params.sigma, params.t, params.p
    if b1 <= 0 or b1 * s1 >= t:
        raise DomainError(f"derivative undefined at b1={b1}")
    num = b1 * b1 * s1 * s3 * sig + 2 * b1 * s1 * s2 - s2 * t
    return params.r1 * params.r2 * (t + p) * num / ((t - b1 * s1) ** 2 * b1 * b1)


def _floor(x: Number) -> int:
    # tolerate float noise on values that are mathematically integral
    return math.floor(x + _EPS)


def _fits(params: CostParams, b1: Number, b2: Number, t: Number | None = None) -> bool:
    t = params.t if t is None else t
    used = b1 * params.s1 + b2 * params.s2 + b1 * b2 * params.s3 * params.sigma
    return used <= t + _EPS * max(1.0, float(t))


def optimize(params: CostParams) -> OptimizerResult:
    """Optimal batch sizes for known selectivity.

    The integer candidates round ``b1*`` down and up, each with the largest
    ``b2`` that still fits, and likewise round ``b2*`` with the largest
    fitting ``b1``. The cheapest candidate wins (smaller ``b1`` on ties). Sizes are not clamped to the table
    sizes here; :func:`plan_batches` produces executable sizes.
    """
    _check_budget(params)
    b1_star = optimal_b1(params)
    b2_star = float(b2_of_b1(params, b1_star))

    candidates = set()
    for b1 in {max(1, math.floor(b1_star)), max(1, math.ceil(b1_star))}:
        if b1 * params.s1 < params.t:
            candidates.add((b1, _floor(b2_of_b1(params, b1))))
    for b2 in {max(1, math.floor(b2_star)), max(1, math.ceil(b2_star))}:
        candidates.add((_floor(_b1_of_b2(params, b2)), b2))
    best = None
    for b1, b2 in sorted(candidates):
        if b1 < 1 or b2 < 1:
            continue
        cost = float(block_join_cost(params, (b1, b2), check=False))
        if best is None or cost < best[0]:
            best = (cost, b1, b2)
    if best is None:
        # only a single table-2 tuple fits: grow b1 as far as the budget allows
        b1 = max(1, _floor((params.t - params.s2) / (params.s1 + params.s3 * params.sigma)))
        best = (float(block_join_cost(params, (b1, 1), check=False)), b1, 1)

    _, ib1, ib2 = best
    return OptimizerResult(
        b1_star=b1_star,
        b2_star=b2_star,
        ib1=ib1,
        ib2=ib2,
        predicted_cost=float(block_join_cost(params, (b1_star, b2_star), check=False)),
        predicted_invocations=float(block_invocations(params, (b1_star, b2_star))),
        integer_cost=best[0],
    )


def grid_search_oracle(
    params: CostParams, max_b1: int | None = None, max_b2: int | None = None
) -> tuple[int, int, float]:
    """Exhaustive search over integer batch sizes.

    Evaluates the continuous cost formula at every feasible integer point;
    ties go to the smaller ``b1``, then the smaller ``b2``.
    """
    _check_budget(params)
    s1, s2, s3, sig, t, p, g = (
        float(x) for x in (params.s1, params.s2, params.s3, params.sigma, params.t, params.p, params.g)
    )
    if max_b1 is None:
        max_b1 = max(1, int(t // s1))
    if max_b2 is None:
        max_b2 = max(1, int(t // s2))
    if max_b1 < 1 or max_b2 < 1:
        raise ValueError("grid bounds must be >= 1")

    b2 = np.arange(1, max_b2 + 1, dtype=np.float64)
    best = (math.inf, 0, 0)
    for b1 in range(1, max_b1 + 1):
        used = b1 * s1 + b2 * s2 + b1 * b2 * s3 * sig
        ok = used <= t + _EPS * max(1.0, t)
        if not ok.any():
            # usage grows with b1, so nothing larger fits either
            break
        cost = (params.r1 / b1) * (params.r2 / b2) * (p + b1 * s1 + b2 * s2 + b1 * b2 * sig * s3 * g)
        cost = np.where(ok, cost, np.inf)
        j = int(np.argmin(cost))
        if cost[j] < best[0]:
            best = (float(cost[j]), b1, j + 1)
    if best[1] == 0:
        raise InfeasibleBudget("no feasible batch sizes within the grid bounds")
    return best[1], best[2], best[0]


def plan_batches(
    params: CostParams, *, sentinel_tokens: int = 1, headroom_pairs: int = 0
) -> tuple[int, int]:
    """Integer batch sizes for actually running the block join.

    Unlike :func:`optimize`, this minimizes the cost of the real execution:
    batch counts are ceilings, sizes are capped by the table sizes, and
    ``sentinel_tokens`` of every answer are reserved for the end marker.
    For each ``b1`` the largest fitting ``b2`` is best, so scanning ``b1``
    gives the exact optimum of :func:`semjoin.costs.realized_block_cost`.

    With ``sigma > 0``, ``headroom_pairs`` extra result pairs are reserved
    per prompt, since a batch pair can hold a few more matches than
    ``sigma * b1 * b2``. The headroom shrinks when the budget is too small.
    """
    if headroom_pairs < 0:
        raise ValueError("headroom_pairs must be >= 0")
    budget = params.t - sentinel_tokens
    smallest = params.s1 + params.s2 + params.sigma * params.s3
    if budget < smallest:
        raise InfeasibleBudget(
            f"budget t={params.t} cannot hold one tuple from each table plus the end marker"
        )
    if params.sigma > 0:
        # shrink the headroom rather than make the budget infeasible
        budget -= min(headroom_pairs * params.s3, budget - smallest)
    s1, s2, s3, sig = (float(x) for x in (params.s1, params.s2, params.s3, params.sigma))
    budget = float(budget)
    b1 = np.arange(1, params.r1 + 1, dtype=np.float64)
    b1 = b1[b1 * s1 + s2 + b1 * s3 * sig <= budget + _EPS * budget]
    b2 = np.floor((budget - b1 * s1) / (s2 + b1 * s3 * sig) + _EPS)
    b2 = np.minimum(b2, params.r2)
    n1 = np.ceil(params.r1 / b1)
    n2 = np.ceil(params.r2 / b2)
    p, g = float(params.p), float(params.g)
    cost = n1 * n2 * (p + g * sentinel_tokens) + n2 * params.r1 * s1 + n1 * params.r2 * s2
    i = int(np.argmin(cost))
    plan = int(b1[i]), int(b2[i])
    assert _fits(params, plan[0], plan[1], budget)
    return plan


def planned_cost(params: CostParams, plan: tuple[int, int], *, sentinel_tokens: int = 1) -> Number:
    return realized_block_cost(params, plan[0], plan[1], sentinel_tokens=sentinel_tokens)


__all__ = [
    "InfeasibleBudget",
    "OptimizerResult",
    "b2_of_b1",
    "derivative_cstar",
    "grid_search_oracle",
    "optimal_b1",
    "optimal_b1_closed_form",
    "optimize",
    "plan_batches",
    "planned_cost",
]
