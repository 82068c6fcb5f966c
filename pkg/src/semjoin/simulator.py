"""Cost-scaling sweeps over synthetic data with the simulated backend."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backends.simulated import HashOracle, LatticeOracle, SimulatedBackend, SimulatedWorld
from .joins import JoinReport, JoinSettings, adaptive_join, block_join, tuple_join
from .model import CostParams, Pricing, Table, TokenLedger, Tuple
from .optimizer import plan_batches

SWEEP_OPERATORS = ("tuple", "block_conservative", "block_informed", "adaptive")
SWEEP_VARIABLES = ("r1", "s1", "sigma")
CSV_NAMES = {
    "tuple": "tuple",
    "block_conservative": "conservative_block",
    "block_informed": "informed_block",
    "adaptive": "adaptive",
}
PREDICATE = "the two entries match"

DEFAULT_ALPHA = 4.0
ADAPTIVE_START_FACTOR = 0.01  # start the adaptive join at sigma / 100


def default_params() -> CostParams:
    return CostParams(r1=5000, r2=5000, s1=30, s2=30, s3=2, sigma=0.001, g=2, p=50, t=8192)


def default_pricing() -> Pricing:
    return Pricing.gpt4()


@dataclass(frozen=True)
class SweepConfig:
    variable: str
    values: tuple
    fixed: CostParams = field(default_factory=default_params)
    operators: tuple[str, ...] = SWEEP_OPERATORS
    pricing: Pricing = field(default_factory=default_pricing)
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    oracle: str = "lattice"
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "operators", tuple(self.operators))
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if not self.operators:
            raise ValueError("sweep needs at least one operator")
        unknown = set(self.operators) - set(SWEEP_OPERATORS)
        if unknown:
            raise ValueError(f"unknown operators {sorted(unknown)}")
        if self.oracle not in ("lattice", "hash"):
            raise ValueError("oracle must be 'lattice' or 'hash'")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        fixed = default_params().with_(**data.get("defaults", {}))
        pricing = data.get("pricing")
        kwargs = dict(
            variable=data["variable"],
            values=data["values"],
            fixed=fixed,
            operators=data.get("operators", SWEEP_OPERATORS),
            alpha=data.get("alpha", DEFAULT_ALPHA),
            seed=data.get("seed", 0),
            oracle=data.get("oracle", "lattice"),
            jobs=data.get("jobs", 1),
        )
        if pricing:
            kwargs["pricing"] = Pricing.per_thousand(pricing["read_per_1k"], pricing["write_per_1k"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class OperatorResult:
    tokens_read: int
    tokens_written: int
    invocations: int
    overflows: int
    token_cost: float
    cost: float
    pairs: int


@dataclass(frozen=True)
class SweepRow:
    variable: str
    value: float
    params: CostParams
    results: dict

    def cost(self, operator: str) -> float:
        return self.results[operator].cost


def synthetic_table(rows: int, tokens: int, prefix: str) -> Table:
    """``rows`` tuples of exactly ``tokens`` whitespace tokens each, ids ``0..rows-1``."""
    body = " ".join(["w"] * (int(tokens) - 1))
    texts = (f"{prefix}{i} {body}".rstrip() for i in range(rows))
    return Table(tuple(Tuple(i, s, int(tokens)) for i, s in enumerate(texts)), "whitespace")


def _params_at(config: SweepConfig, value) -> CostParams:
    if config.variable == "s1":
        return config.fixed.with_(s1=int(value))
    if config.variable == "r1":
        return config.fixed.with_(r1=int(value))
    return config.fixed.with_(sigma=value)


def _result(report: JoinReport, params: CostParams, pricing: Pricing) -> OperatorResult:
    led: TokenLedger = report.ledger
    return OperatorResult(
        led.tokens_read,
        led.tokens_written,
        led.invocations,
        led.overflows,
        float(led.token_cost(params.g)),
        led.cost(pricing),
        report.pair_count,
    )


def run_point(config: SweepConfig, value) -> SweepRow:
    """Run every configured operator on one synthetic instance."""
    params = _params_at(config, value)
    if not float(params.s1).is_integer() or not float(params.s2).is_integer():
        raise ValueError("synthetic tables need integral tuple sizes")
    R1 = synthetic_table(params.r1, params.s1, "a")
    R2 = synthetic_table(params.r2, params.s2, "b")
    oracle_cls = LatticeOracle if config.oracle == "lattice" else HashOracle
    world = SimulatedWorld(oracle_cls(float(params.sigma), config.seed), int(params.s3), int(params.t), int(params.p))
    settings = JoinSettings(token_budget=int(params.t), static_tokens=int(params.p), pair_tokens=int(params.s3),
                            pricing=config.pricing)
    if not math.isclose(config.pricing.g, float(params.g)):
        raise ValueError(f"pricing implies g={config.pricing.g}, parameters say g={params.g}")

    results = {}
    for op in config.operators:
        backend = SimulatedBackend(world)
        if op == "tuple":
            report = tuple_join(R1, R2, PREDICATE, backend, settings)
        elif op == "adaptive":
            e0 = float(params.sigma) * ADAPTIVE_START_FACTOR or 1e-9
            report = adaptive_join(R1, R2, PREDICATE, e0, config.alpha, backend, settings)
        else:
            sigma = 1 if op == "block_conservative" else params.sigma
            b1, b2 = plan_batches(params.with_(sigma=sigma), headroom_pairs=settings.headroom_pairs)
            report = block_join(R1, R2, PREDICATE, b1, b2, backend, settings)
            if not isinstance(report, JoinReport):
                raise RuntimeError(f"{op} overflowed at batch {report.batch_index}")
        results[op] = _result(report, params, config.pricing)
    return SweepRow(config.variable, value, params, results)


def _run_point_star(args):
    return run_point(*args)


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """One row per sweep value, in config order."""
    if config.jobs > 1 and len(config.values) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_run_point_star, [(config, v) for v in config.values]))
    return [run_point(config, v) for v in config.values]


def csv_header(variable: str) -> list[str]:
    names = [CSV_NAMES[op] for op in SWEEP_OPERATORS]
    header = [variable]
    header += [f"{n}_cost" for n in names]
    header += [f"{n}_usd" for n in names]
    for n in names:
        header += [f"{n}_tokens_read", f"{n}_tokens_written", f"{n}_invocations", f"{n}_overflows"]
    return header


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(int(x)) if x.is_integer() else repr(x)
    return str(x)


def emit_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    """Write sweep rows; operators that were not run get empty cells."""
    if not rows:
        raise ValueError("no rows to write")
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(rows[0].variable))
        for row in rows:
            res = [row.results.get(op) for op in SWEEP_OPERATORS]
            line = [_fmt(row.value)]
            line += ["" if r is None else _fmt(r.token_cost) for r in res]
            line += ["" if r is None else f"{r.cost:.4f}" for r in res]
            for r in res:
                line += ["", "", "", ""] if r is None else [r.tokens_read, r.tokens_written, r.invocations, r.overflows]
            w.writerow(line)


def summary_table(rows: Sequence[SweepRow]) -> str:
    ops = [op for op in SWEEP_OPERATORS if op in rows[0].results]
    head = f"{rows[0].variable:>10}" + "".join(f"{CSV_NAMES[op]:>22}" for op in ops)
    lines = [head]
    for row in rows:
        lines.append(f"{_fmt(row.value):>10}" + "".join(f"{row.cost(op):>22.4f}" for op in ops))
    return "\n".join(lines)


def default_sweep(variable: str) -> tuple:
    """Log-spaced grids covering the usual plotting ranges."""
    return {
        "r1": (1000, 2000, 5000, 10000),
        "s1": (10, 20, 50, 100, 200),
        "sigma": (0.0001, 0.001, 0.01, 0.1),
    }[variable]


__all__ = [
    "OperatorResult",
    "SWEEP_OPERATORS",
    "SweepConfig",
    "SweepRow",
    "csv_header",
    "default_params",
    "default_pricing",
    "default_sweep",
    "emit_csv",
    "run_point",
    "run_sweep",
    "summary_table",
    "synthetic_table",
]
