import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from semjoin.costs import DomainError, cstar
from semjoin.model import CostParams
from semjoin.optimizer import (
    InfeasibleBudget,
    b2_of_b1,
    derivative_cstar,
    grid_search_oracle,
    optimal_b1,
    optimal_b1_closed_form,
    optimize,
    plan_batches,
    planned_cost,
)

WORKED = CostParams(r1=50, r2=10, s1=10, s2=2, s3=1, sigma=1, g=1, p=1, t=100)


def test_worked_example():
    res = optimize(WORKED)
    # b1* = (-20 + sqrt(400 + 2000)) / 10
    assert res.b1_star == pytest.approx((-20 + math.sqrt(2400)) / 10, abs=1e-12)
    assert abs(res.b1_star - 2.899) < 1e-3
    assert (res.ib1, res.ib2) == (3, 14)
    assert grid_search_oracle(WORKED)[:2] == (3, 14)


def test_worked_example_grid_matches_brute_force():
    cost, b1, b2 = oracles.brute_force_integer_optimum(50, 10, 10, 2, 1, 1, 1, 1, 100)
    gb1, gb2, gcost = grid_search_oracle(WORKED)
    assert (gb1, gb2) == (b1, b2)
    assert gcost == pytest.approx(float(cost), rel=1e-12)


def test_b2_of_b1():
    assert b2_of_b1(WORKED, 3) == 14
    assert b2_of_b1(WORKED, 10) == 0
    with pytest.raises(DomainError):
        b2_of_b1(WORKED, 11)


def test_zero_selectivity_uses_rationalized_limit():
    params = CostParams(100, 100, 10, 10, 2, 0, t=1000)
    assert optimal_b1(params) == pytest.approx(1000 / 20)
    res = optimize(params)
    assert (res.ib1, res.ib2) == (50, 50)
    with pytest.raises(DomainError):
        optimal_b1_closed_form(params)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 100), st.integers(1, 100), st.integers(1, 5),
    st.floats(1e-6, 1.0), st.integers(200, 20000),
)
def test_rationalized_root_equals_closed_form(s1, s2, s3, sigma, t):
    params = CostParams(10, 10, s1, s2, s3, sigma, t=t)
    assert optimal_b1(params) == pytest.approx(optimal_b1_closed_form(params), rel=1e-6)


def test_derivative_vanishes_at_optimum_and_matches_finite_differences():
    params = CostParams(5000, 5000, 30, 30, 2, 0.001, g=2, p=50, t=8192)
    b1 = optimal_b1(params)
    scale = float(cstar(params, b1)) / b1
    assert abs(derivative_cstar(params, b1)) / scale < 1e-9
    for x in (20.0, 80.0, 200.0):
        h = 1e-4 * x
        fd = (cstar(params, x + h) - cstar(params, x - h)) / (2 * h)
        assert derivative_cstar(params, x) == pytest.approx(fd, rel=1e-4)


def test_derivative_changes_sign_around_worked_optimum():
    params = CostParams(50, 10, 10, 2, 1, 1, g=1, p=1, t=100)
    assert derivative_cstar(params, F(2)) < 0 < derivative_cstar(params, F(4))


def test_infeasible_budget():
    with pytest.raises(InfeasibleBudget):
        optimize(CostParams(10, 10, 30, 30, 2, 1, t=50))
    with pytest.raises(InfeasibleBudget):
        plan_batches(CostParams(10, 10, 30, 30, 2, 0, t=60))


def test_optimize_falls_back_to_single_table2_tuple():
    # b1* rounds to sizes where no second tuple fits
    params = CostParams(100, 100, 10, 50, 1, 1, t=70)
    res = optimize(params)
    assert res.ib2 == 1
    assert res.ib1 * 10 + 50 + res.ib1 <= 70


def _brute_force_plan_cost(params, sentinel=1):
    best = None
    budget = F(params.t) - sentinel
    for b1 in range(1, params.r1 + 1):
        for b2 in range(1, params.r2 + 1):
            if not oracles.fits(params.s1, params.s2, params.s3, params.sigma, budget, b1, b2):
                break
            n1, n2 = -(-params.r1 // b1), -(-params.r2 // b2)
            reads = n1 * n2 * params.p + n2 * params.r1 * params.s1 + n1 * params.r2 * params.s2
            writes = n1 * n2 * sentinel + F(params.sigma) * params.r1 * params.r2 * params.s3
            c = reads + params.g * writes
            if best is None or c < best:
                best = c
    return best


@pytest.mark.parametrize("seed", range(25))
def test_plan_batches_is_integer_optimal(seed):
    rng = random.Random(seed)
    params = CostParams(
        r1=rng.randint(1, 60), r2=rng.randint(1, 60), s1=rng.randint(1, 20), s2=rng.randint(1, 20),
        s3=rng.randint(1, 3), sigma=F(rng.randint(0, 100), 100), g=rng.randint(1, 3),
        p=rng.randint(0, 30), t=rng.randint(60, 400),
    )
    if params.t - 1 < params.s1 + params.s2 + params.sigma * params.s3:
        pytest.skip("infeasible draw")
    plan = plan_batches(params)
    assert plan[0] <= params.r1 and plan[1] <= params.r2
    assert oracles.fits(params.s1, params.s2, params.s3, params.sigma, params.t - 1, *plan)
    assert planned_cost(params, plan) == pytest.approx(float(_brute_force_plan_cost(params)), rel=1e-12)


def test_optimal_b1_decreases_with_selectivity():
    base = CostParams(1000, 1000, 25, 40, 3, 0.0, t=4096)
    values = [optimal_b1(base.with_(sigma=s)) for s in (0, 1e-4, 1e-3, 1e-2, 0.1, 1)]
    assert values == sorted(values, reverse=True)


def test_plan_batches_headroom():
    params = CostParams(5000, 5000, 30, 30, 2, F(1, 10), g=2, p=50, t=8192)
    b1, b2 = plan_batches(params, headroom_pairs=3)
    assert oracles.fits(30, 30, 2, F(1, 10), 8192 - 1 - 3 * 2, b1, b2)
    # no headroom at zero selectivity
    zero = params.with_(sigma=0)
    assert plan_batches(zero, headroom_pairs=3) == plan_batches(zero)
    # shrinks instead of failing on a tight budget
    tight = CostParams(10, 10, 10, 10, 40, 1, t=61)
    assert plan_batches(tight, headroom_pairs=3) == (1, 1)
    with pytest.raises(ValueError):
        plan_batches(params, headroom_pairs=-1)


def test_optimize_rounds_both_dimensions():
    # b2* is small here: flooring it costs more than shrinking b1
    params = CostParams(r1=50_000, r2=50_000, s1=6, s2=98, s3=1, sigma=4.6557781771339364e-05, g=1, p=28, t=1146)
    res = optimize(params)
    _, _, grid = grid_search_oracle(params)
    assert res.b2_star < 7
    assert res.integer_cost <= 1.02 * grid
