import math
import random
from fractions import Fraction as F

import numpy as np
import pytest

import oracles
from conftest import make_table
from semjoin.backends import (
    BackendRejected,
    CompletionOutcome,
    HashEmbeddingBackend,
    LatticeOracle,
    PairSetOracle,
    PredicateOracle,
    SimulatedBackend,
    SimulatedWorld,
)
from semjoin.benchgen import score
from semjoin.costs import realized_block_cost, tuple_join_cost
from semjoin.joins import (
    JoinAborted,
    JoinReport,
    JoinSettings,
    JoinSpec,
    NonConvergence,
    Overflow,
    adaptive_join,
    block_join,
    embedding_join,
    join_params,
    run_join,
    tuple_join,
)
from semjoin.model import CostParams, Pricing, Table
from semjoin.optimizer import optimize, plan_batches
from semjoin.simulator import synthetic_table

SETTINGS = JoinSettings(token_budget=1000, static_tokens=20, pair_tokens=2)


def sim(oracle, s3=2, t=1000, p=20, tables=()):
    return SimulatedBackend(SimulatedWorld(oracle, s3, t, p), tables)


def test_tuple_join_always_false():
    R1, R2 = make_table(3), make_table(3)
    rep = tuple_join(R1, R2, "j", sim(PredicateOracle(lambda a, b: False)), SETTINGS)
    assert rep.pairs == set()
    assert rep.ledger.invocations == 9 and rep.ledger.tokens_written == 9


def test_tuple_join_id_equality():
    R1, R2 = make_table(5), make_table(5)
    rep = tuple_join(R1, R2, "j", sim(PredicateOracle(lambda a, b: a.id == b.id)), SETTINGS)
    assert rep.pairs == {(i, i) for i in range(5)}


def test_tuple_join_ledger_equals_cost_model():
    R1, R2 = make_table(6, size=4), make_table(7, size=9)
    rep = tuple_join(R1, R2, "j", sim(LatticeOracle(0.2)), SETTINGS)
    params = CostParams(6, 7, 4, 9, 2, F(1, 5), g=2, p=20)
    assert rep.ledger.token_cost(2) == tuple_join_cost(params)
    assert rep.ledger.token_cost(2) == oracles.tuple_join_cost(6, 7, 4, 9, 20, 2)


def test_tuple_join_raw_path_matches_structured():
    R1, R2 = make_table(4, prefix="a"), make_table(3, prefix="b")
    be = sim(LatticeOracle(0.4, 2), tables=[R1, R2])

    class RawOnly:
        static_prompt_tokens = 20

        def complete(self, req):
            return be.complete(req)

    raw = tuple_join(R1, R2, "j", RawOnly(), SETTINGS)
    structured = tuple_join(R1, R2, "j", be, SETTINGS)
    assert raw.pairs == structured.pairs and raw.ledger == structured.ledger


@pytest.mark.parametrize("b1,b2", [(1, 1), (2, 3), (7, 5), (3, 5), (7, 1)])
def test_block_join_exact_oracle(small_tables, b1, b2):
    R1, R2 = small_tables
    oracle = LatticeOracle(0.3, 4)
    rep = block_join(R1, R2, "j", b1, b2, sim(oracle), SETTINGS)
    assert isinstance(rep, JoinReport)
    assert rep.pairs == oracle.truth(R1, R2)
    assert rep.ledger.invocations == math.ceil(7 / b1) * math.ceil(5 / b2)


def test_block_join_ledger_matches_enumeration():
    R1, R2 = make_table(23, size=6), make_table(17, size=4)
    oracle = LatticeOracle(0.1, 9)
    rep = block_join(R1, R2, "j", 5, 4, sim(oracle), SETTINGS)
    read, written, calls = oracles.simulated_block_ledger(
        [6] * 23, [4] * 17, 5, 4, 20, 2,
        lambda i, j: oracles.lattice_match(i, j, 0.1, oracle.phase1, oracle.phase2))
    assert (rep.ledger.tokens_read, rep.ledger.tokens_written, rep.ledger.invocations) == (read, written, calls)


def test_informed_block_join_matches_cost_model():
    # sigma * b2 integral, so every batch pair holds exactly sigma * b1 * b2 matches
    params = CostParams(400, 300, 10, 10, 2, F(1, 20), g=2, p=20, t=1000)
    R1, R2 = synthetic_table(400, 10, "a"), synthetic_table(300, 10, "b")
    b1, b2 = 40, 20
    rep = block_join(R1, R2, "j", b1, b2, sim(LatticeOracle(0.05, 1)), SETTINGS)
    assert isinstance(rep, JoinReport) and rep.ledger.overflows == 0
    assert rep.pair_count == 6000
    assert rep.ledger.token_cost(2) == realized_block_cost(params, b1, b2)


def test_block_join_with_optimized_sizes_does_not_overflow():
    params = CostParams(2000, 1500, 30, 30, 2, F(1, 1000), g=2, p=50, t=8192)
    R1, R2 = synthetic_table(2000, 30, "a"), synthetic_table(1500, 30, "b")
    b = plan_batches(params)
    settings = JoinSettings(token_budget=8192, static_tokens=50, pair_tokens=2)
    rep = block_join(R1, R2, "j", *b, sim(LatticeOracle(0.001), t=8192, p=50), settings)
    assert isinstance(rep, JoinReport) and rep.ledger.overflows == 0
    continuous = float(realized_block_cost(params, *b))
    assert rep.ledger.token_cost(2) == pytest.approx(continuous, rel=0.05)


def test_block_join_overflows_with_tiny_estimate():
    R1, R2 = synthetic_table(50, 10, "a"), synthetic_table(50, 10, "b")
    settings = JoinSettings(token_budget=1000, static_tokens=0, pair_tokens=2)
    res = optimize(join_params(R1, R2, 0.001, 0, settings))
    b1, b2 = min(res.ib1, 50), min(res.ib2, 50)
    out = block_join(R1, R2, "j", b1, b2, sim(LatticeOracle(1.0), t=1000, p=0), settings)
    assert isinstance(out, Overflow)
    assert out.batch_index == (0, 0)
    assert out.ledger.overflows == 1 and out.ledger.invocations == 1


def test_block_join_validates_sizes(small_tables):
    R1, R2 = small_tables
    with pytest.raises(ValueError):
        block_join(R1, R2, "j", 8, 1, sim(LatticeOracle(0.1)), SETTINGS)


def test_block_join_generic_backend_uses_margin(small_tables):
    R1, R2 = small_tables
    seen = []

    class Recorder:
        static_prompt_tokens = 20

        def complete(self, req):
            seen.append(req.max_output_tokens)
            return CompletionOutcome("Finished", 10, 1)

    block_join(R1, R2, "j", 7, 5, Recorder(), SETTINGS)
    used = math.ceil((20 + 7 * 4 + 5 * 3) * 1.1) - 20
    assert seen == [1000 - used]


def test_backend_error_reports_partial_results(small_tables):
    R1, R2 = small_tables
    calls = []

    class Flaky:
        static_prompt_tokens = 0

        def complete(self, req):
            calls.append(1)
            if len(calls) > 2:
                raise BackendRejected("quota")
            return CompletionOutcome("1,1;Finished", 5, 3)

    with pytest.raises(JoinAborted) as exc:
        block_join(R1, R2, "j", 2, 5, Flaky(), SETTINGS)
    assert exc.value.report.partial
    assert exc.value.report.pair_count == 2
    assert exc.value.report.ledger.invocations == 2


def test_adaptive_with_exact_estimate_runs_once():
    R1, R2 = synthetic_table(300, 10, "a"), synthetic_table(200, 10, "b")
    settings = JoinSettings(token_budget=2000, static_tokens=20, pair_tokens=2)
    be = sim(LatticeOracle(0.05, 2), t=2000)
    rep = adaptive_join(R1, R2, "j", 0.05, 4, be, settings)
    assert [a.outcome for a in rep.attempts] == ["completed"]
    b = plan_batches(join_params(R1, R2, 0.05, 20, settings))
    informed = block_join(R1, R2, "j", *b, sim(LatticeOracle(0.05, 2), t=2000), settings)
    assert rep.ledger == informed.ledger


def test_adaptive_estimates_grow_geometrically():
    R1, R2 = synthetic_table(400, 10, "a"), synthetic_table(400, 10, "b")
    settings = JoinSettings(token_budget=2000, static_tokens=20, pair_tokens=2)
    rep = adaptive_join(R1, R2, "j", 0.0005, 4, sim(LatticeOracle(0.05, 2), t=2000), settings)
    es = [a.estimate for a in rep.attempts]
    assert all(b == pytest.approx(a * 4) for a, b in zip(es, es[1:]))
    assert [a.outcome for a in rep.attempts][-1] == "completed"
    assert all(a.outcome == "overflow" for a in rep.attempts[:-1])
    assert len(rep.attempts) - 1 <= math.ceil(math.log(100, 4))
    assert sum(a.tokens_read for a in rep.attempts) == rep.ledger.tokens_read
    assert rep.pairs == LatticeOracle(0.05, 2).truth(R1, R2)


def test_adaptive_caps_estimate_and_signals_nonconvergence():
    # every pair matches but the model needs 40 tokens per pair: nothing can fit
    R1, R2 = synthetic_table(20, 10, "a"), synthetic_table(20, 10, "b")
    settings = JoinSettings(token_budget=200, static_tokens=0, pair_tokens=2)
    be = sim(LatticeOracle(1.0), s3=40, t=200, p=0)
    with pytest.raises(NonConvergence) as exc:
        adaptive_join(R1, R2, "j", 0.01, 4, be, settings)
    es = [a.estimate for a in exc.value.report.attempts]
    assert es[-1] == 1.0 and es == sorted(es)


def test_embedding_join_perfect_and_ties():
    R1 = Table.from_texts(["x", "y"], "whitespace")
    R2 = Table.from_texts(["q", "x2", "y2"], "whitespace", ids=[5, 3, 4])
    e = np.eye(4)
    be = HashEmbeddingBackend(dim=4, overrides={"x": e[0], "y": e[1], "x2": e[0], "y2": e[1], "q": e[2]})
    rep = embedding_join(R1, R2, be)
    assert rep.pairs == {(0, 3), (1, 4)}
    assert rep.ledger.tokens_written == 0

    tie = HashEmbeddingBackend(dim=4, overrides={"x": e[3], "y": e[3], "x2": e[0], "y2": e[1], "q": e[2]})
    assert embedding_join(R1, R2, tie).pairs == {(0, 3), (1, 3)}


def test_embedding_join_symmetric():
    R1 = Table.from_texts(["a", "b"], "whitespace")
    R2 = Table.from_texts(["c", "d"], "whitespace")
    e = np.eye(2)
    be = HashEmbeddingBackend(dim=2, overrides={"a": e[0], "b": e[0], "c": e[0], "d": e[1]})
    assert embedding_join(R1, R2, be).pairs == {(0, 0), (1, 0)}
    assert embedding_join(R1, R2, be, symmetric=True).pairs == {(0, 0), (1, 0), (0, 1)}


def test_run_join_dispatch(small_tables):
    R1, R2 = small_tables
    oracle = LatticeOracle(0.3, 1)
    truth = oracle.truth(R1, R2)
    for spec in (JoinSpec("j", "tuple"), JoinSpec("j", "block", (3, 2)), JoinSpec("j", "adaptive", e0=0.01)):
        rep = run_join(spec, R1, R2, sim(oracle), SETTINGS)
        assert rep.pairs == truth
    with pytest.raises(ValueError):
        JoinSpec("j", "block")
    with pytest.raises(ValueError):
        JoinSpec("j", alpha=1)


@pytest.mark.parametrize("seed", range(30))
def test_operator_equivalence_random(seed):
    rng = random.Random(seed)
    n1, n2 = rng.randint(1, 20), rng.randint(1, 20)
    R1 = Table.from_texts([f"left {i} " + "x " * rng.randint(0, 6) for i in range(n1)], "whitespace")
    R2 = Table.from_texts([f"right {i} " + "y " * rng.randint(0, 6) for i in range(n2)], "whitespace")
    truth = {(i, j) for i in range(n1) for j in range(n2) if rng.random() < 0.3}
    be = sim(PairSetOracle(truth), t=8192, p=40)
    settings = JoinSettings(token_budget=8192, pair_tokens=2)
    reports = [
        tuple_join(R1, R2, "j", be, settings),
        block_join(R1, R2, "j", rng.randint(1, n1), rng.randint(1, n2), be, settings),
        adaptive_join(R1, R2, "j", 0.001, 4, be, settings),
    ]
    for rep in reports:
        assert isinstance(rep, JoinReport)
        assert rep.pairs == truth
        assert score(rep, truth).f1 == 1 or not truth


def test_determinism():
    R1, R2 = synthetic_table(300, 10, "a"), synthetic_table(300, 10, "b")
    settings = JoinSettings(token_budget=1000, static_tokens=20, pair_tokens=2, pricing=Pricing(1, 2))
    runs = [adaptive_join(R1, R2, "j", 1e-4, 4, sim(LatticeOracle(0.02, 3)), settings) for _ in range(2)]
    assert runs[0].ledger == runs[1].ledger
    assert np.array_equal(runs[0].pair_array, runs[1].pair_array)
