"""Command-line interface: ``semjoin {optimize,cost,simulate,join,bench,gen}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from fractions import Fraction
from pathlib import Path

from . import __version__
from .backends import (
    BackendError,
    HashEmbeddingBackend,
    HashOracle,
    HttpBackend,
    HttpConfig,
    LatticeOracle,
    PairSetOracle,
    RecordReplayBackend,
    SimulatedBackend,
    SimulatedWorld,
)
from .benchgen import SCENARIOS, read_truth, score
from .costs import BatchSizes, block_join_cost, realized_block_cost, tuple_join_cost
from .joins import (
    OPERATORS,
    JoinAborted,
    JoinReport,
    JoinSettings,
    JoinSpec,
    NonConvergence,
    Overflow,
    run_join,
    static_tokens,
)
from .model import CostParams, InvalidParams, Pricing, load_table
from .optimizer import InfeasibleBudget, optimize
from .simulator import SWEEP_OPERATORS, SweepConfig, default_sweep, emit_csv, run_sweep, summary_table

log = logging.getLogger("semjoin")

EXIT_USAGE = 2
EXIT_OVERFLOW = 3
EXIT_BACKEND = 4


def _money(x: float) -> str:
    return f"${x:,.4f}"


def _number(text: str):
    """Parse ints, decimals and fractions like ``1/3`` exactly."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return float(value) if "e" in text.lower() else value


# --------------------------------------------------------------------------
# optimize / cost
# --------------------------------------------------------------------------


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("cost parameters")
    g.add_argument("--r1", type=int, default=5000, help="rows of table 1")
    g.add_argument("--r2", type=int, default=5000, help="rows of table 2")
    g.add_argument("--s1", type=_number, default=30, help="tokens per tuple of table 1")
    g.add_argument("--s2", type=_number, default=30, help="tokens per tuple of table 2")
    g.add_argument("--s3", type=_number, default=2, help="output tokens per result pair")
    g.add_argument("--sigma", type=_number, default=Fraction(1, 1000), help="join selectivity")
    g.add_argument("--g", type=_number, default=2, help="relative price of an output token")
    g.add_argument("--p", type=_number, default=50, help="static prompt tokens")
    g.add_argument("--t", type=_number, default=8192, help="token budget net of the static prompt")


def _params(args) -> CostParams:
    return CostParams(args.r1, args.r2, args.s1, args.s2, args.s3, args.sigma, args.g, args.p, args.t)


def _add_pricing_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--read-price", type=float, default=0.03, help="USD per 1k tokens read")
    p.add_argument("--write-price", type=float, default=0.06, help="USD per 1k tokens written")


def _pricing(args) -> Pricing:
    return Pricing.per_thousand(args.read_price, args.write_price)


def cmd_optimize(args) -> int:
    try:
        res = optimize(_params(args))
    except (InfeasibleBudget, InvalidParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(res.as_dict(), indent=2))
        return 0
    print(f"b1* = {res.b1_star:.4f}")
    print(f"b2* = {res.b2_star:.4f}")
    print(f"b1 = {res.ib1}")
    print(f"b2 = {res.ib2}")
    print(f"predicted invocations = {res.predicted_invocations:.4f}")
    print(f"predicted cost = {res.predicted_cost:.4f} (read-token units)")
    print(f"integer cost = {res.integer_cost:.4f} (read-token units)")
    return 0


def cmd_cost(args) -> int:
    try:
        params = _params(args)
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    pricing = _pricing(args)
    unit = pricing.read_cost_per_token
    tc = tuple_join_cost(params)
    print(f"tuple join: {float(tc):.4f} tokens, {_money(float(tc) * unit)}")
    if args.b1 is not None and args.b2 is not None:
        b = BatchSizes(args.b1, args.b2)
        if not b.feasible(params):
            print(f"warning: batch ({args.b1}, {args.b2}) exceeds the token budget", file=sys.stderr)
        bc = float(block_join_cost(params, b, check=False))
        rc = float(realized_block_cost(params, b.ib1, b.ib2))
        print(f"block join (continuous): {bc:.4f} tokens, {_money(bc * unit)}")
        print(f"block join (integer batches): {rc:.4f} tokens, {_money(rc * unit)}")
    return 0


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        if args.config:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        else:
            data = {"variable": args.variable, "values": args.values or list(default_sweep(args.variable))}
        if args.operators is not None:
            data["operators"] = args.operators
        if args.jobs is not None:
            data["jobs"] = args.jobs
        if "operators" in data and not data["operators"]:
            print("error: the operator set is empty", file=sys.stderr)
            return EXIT_USAGE
        config = SweepConfig.from_dict(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: bad sweep config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rows = run_sweep(config)
    except InfeasibleBudget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    emit_csv(rows, args.out)
    print(summary_table(rows))
    print(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# join / bench
# --------------------------------------------------------------------------


def _http_config(args) -> HttpConfig:
    # precedence: flags > config file > environment > defaults
    settings = {}
    for key, var in (("base_url", "SEMJOIN_BASE_URL"), ("model", "SEMJOIN_MODEL")):
        if os.environ.get(var):
            settings[key] = os.environ[var]
    if args.config:
        settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    flags = {"base_url": args.base_url, "model": args.model, "timeout": args.timeout}
    settings.update({k: v for k, v in flags.items() if v is not None})
    known = {f.name for f in fields(HttpConfig)}
    return HttpConfig(**{k: v for k, v in settings.items() if k in known})


def _oracle(spec: str | None, truth):
    if spec in (None, "truth"):
        if truth is None:
            raise ValueError("the simulated backend needs --truth or --oracle lattice:SIGMA / hash:SIGMA")
        return PairSetOracle(truth)
    kind, _, sigma = spec.partition(":")
    if kind not in ("lattice", "hash") or not sigma:
        raise ValueError(f"bad oracle {spec!r}")
    cls = LatticeOracle if kind == "lattice" else HashOracle
    return cls(float(Fraction(sigma)))


def _backend(args, tables, truth, predicate: str, settings: JoinSettings):
    """The completion backend; a cassette with a live backend records to it."""
    if args.backend == "replay":
        if not args.cassette:
            raise ValueError("--cassette is required for the replay backend")
        return RecordReplayBackend(None, args.cassette, "replay")
    if args.backend == "http":
        inner = HttpBackend(_http_config(args), tokenizer=settings.tokenizer)
    else:
        p = settings.static_tokens
        if p is None:
            p = static_tokens(None, predicate, settings)
        world = SimulatedWorld(_oracle(args.oracle, truth), settings.pair_tokens, settings.token_budget, p)
        inner = SimulatedBackend(world, tables)
    if args.cassette:
        return RecordReplayBackend(inner, args.cassette, "record")
    return inner


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=("simulated", "http", "replay"), default="simulated")
    g.add_argument("--oracle", help="simulated match oracle: 'truth' (default), 'lattice:SIGMA' or 'hash:SIGMA'")
    g.add_argument("--model", help="model name for the HTTP backend")
    g.add_argument("--base-url", help="base URL of an OpenAI-compatible API")
    g.add_argument("--timeout", type=float, help="per-request timeout in seconds")
    g.add_argument("--config", help="JSON file with HTTP backend settings")
    g.add_argument("--cassette", help="JSON-lines cassette: recorded to by live backends, read by replay")
    j = p.add_argument_group("operator")
    j.add_argument("--operator", choices=OPERATORS, default="adaptive")
    j.add_argument("--b1", type=int, help="block join: tuples of table 1 per prompt")
    j.add_argument("--b2", type=int, help="block join: tuples of table 2 per prompt")
    j.add_argument("--e0", type=float, default=None, help="adaptive join: initial selectivity estimate")
    j.add_argument("--alpha", type=float, default=4.0, help="adaptive join: estimate growth factor")
    j.add_argument("--symmetric", action="store_true", help="embedding join: match in both directions")
    j.add_argument("--budget", type=int, default=8192, help="token budget net of the static prompt")
    j.add_argument("--static-tokens", type=int, help="static prompt size (default: measured)")
    j.add_argument("--pair-tokens", type=int, default=2, help="output tokens per result pair")
    j.add_argument("--tokenizer", default="chars4", help="chars4, whitespace or vocab:/path/tokenizer.json")
    j.add_argument("--margin", type=float, default=1.1, help="safety factor on estimated prompt sizes")
    j.add_argument("--out-dir", default=".", help="directory for pairs.csv, ledger.json, metrics.json")
    j.add_argument("--timing", action="store_true", help="include wall-clock time in ledger.json")
    _add_pricing_flags(p)


def _write_outputs(out_dir: Path, result, settings: JoinSettings, truth, timing: bool) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    overflow = isinstance(result, Overflow)
    pairs = result.pairs_so_far if overflow else result.pair_array
    rows = sorted({(int(a), int(b)) for a, b in pairs.tolist()})
    with (out_dir / "pairs.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id1", "id2"])
        w.writerows(rows)
    ledger = result.ledger.to_dict(settings.pricing)
    ledger["overflow"] = overflow
    ledger["pairs"] = len(rows)
    if not overflow:
        ledger["operator"] = result.operator
        ledger["partial"] = result.partial
        ledger["attempts"] = [
            {"estimate": a.estimate, "b1": a.b1, "b2": a.b2, "outcome": a.outcome} for a in result.attempts
        ]
    else:
        ledger["overflow_batch"] = list(result.batch_index)
    if timing:
        ledger["wall_time_s"] = result.wall_time
    (out_dir / "ledger.json").write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    metrics = None
    if truth is not None:
        metrics = score(set(rows), truth).as_dict()
        (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                                              encoding="utf-8")
    return {"ledger": ledger, "metrics": metrics}


def _run(args, R1, R2, predicate, truth) -> int:
    settings = JoinSettings(
        token_budget=args.budget,
        static_tokens=args.static_tokens,
        pair_tokens=args.pair_tokens,
        tokenizer=args.tokenizer,
        margin=args.margin,
        pricing=_pricing(args),
    )
    try:
        backend = _backend(args, (R1, R2), truth, predicate, settings)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    embedder = None
    if args.operator == "embedding" and args.backend == "simulated":
        embedder = HashEmbeddingBackend()
    batch_sizes = (args.b1, args.b2) if args.b1 and args.b2 else None
    if args.operator == "block" and batch_sizes is None:
        print("error: --b1 and --b2 are required for the block join", file=sys.stderr)
        return EXIT_USAGE
    e0 = args.e0 if args.e0 is not None else 1e-5
    spec = JoinSpec(predicate, args.operator, batch_sizes, e0, args.alpha, args.symmetric)

    out_dir = Path(args.out_dir)
    code = 0
    try:
        result = run_join(spec, R1, R2, backend, settings, embedder=embedder)
    except (JoinAborted, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        result, code = exc.report, (EXIT_BACKEND if isinstance(exc, JoinAborted) else EXIT_OVERFLOW)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND

    summary = _write_outputs(out_dir, result, settings, truth, args.timing)
    led = summary["ledger"]
    if isinstance(result, Overflow):
        print(f"Overflow at batch pair {result.batch_index} with batch sizes ({result.b1}, {result.b2})")
        code = EXIT_OVERFLOW
    print(f"pairs: {led['pairs']}")
    print(f"invocations: {led['invocations']}  overflows: {led['overflows']}")
    print(f"tokens read: {led['tokens_read']}  tokens written: {led['tokens_written']}")
    print(f"cost: {_money(led['cost'])}")
    if isinstance(result, JoinReport):
        print(f"time: {result.wall_time:.3f} s")
    if summary["metrics"] is not None:
        m = summary["metrics"]
        print(f"recall: {m['recall']:.4f}  precision: {m['precision']:.4f}  f1: {m['f1']:.4f}")
    return code


def cmd_join(args) -> int:
    try:
        R1 = load_table(args.table1, args.tokenizer)
        R2 = load_table(args.table2, args.tokenizer)
        truth = read_truth(args.truth) if args.truth else None
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return _run(args, R1, R2, args.predicate, truth)


def cmd_bench(args) -> int:
    bench = SCENARIOS[args.scenario](seed=args.seed, tokenizer=args.tokenizer)
    out_dir = Path(args.out_dir)
    bench.export(out_dir)
    return _run(args, bench.table1, bench.table2, bench.predicate_text, set(bench.ground_truth))


def cmd_gen(args) -> int:
    gen = SCENARIOS[args.scenario]
    kwargs = {"seed": args.seed}
    if args.n1 is not None and args.n2 is not None:
        bench = gen(args.n1, args.n2, **kwargs)
    else:
        bench = gen(**kwargs)
    paths = bench.export(args.out_dir)
    print(f"{bench.name}: {len(bench.table1)} x {len(bench.table2)} rows, "
          f"{len(bench.ground_truth)} matching pairs (selectivity {float(bench.selectivity):.4f})")
    print(f"predicate: {bench.predicate_text}")
    for name, path in paths.items():
        print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semjoin", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimal batch sizes for a block join")
    _add_param_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("cost", help="predicted tuple and block join costs")
    _add_param_flags(p)
    _add_pricing_flags(p)
    p.add_argument("--b1", type=_number)
    p.add_argument("--b2", type=_number)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("simulate", help="run a simulated cost sweep")
    p.add_argument("--config", help="JSON sweep config")
    p.add_argument("--variable", choices=("r1", "s1", "sigma"), default="r1")
    p.add_argument("--values", type=_number, nargs="+")
    p.add_argument("--operators", nargs="*", choices=SWEEP_OPERATORS)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("join", help="join two tables")
    p.add_argument("table1")
    p.add_argument("table2")
    p.add_argument("--predicate", required=True, help="join condition in natural language")
    p.add_argument("--truth", help="ground-truth CSV with id1,id2 columns")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("bench", help="run a generated benchmark")
    p.add_argument("scenario", choices=sorted(SCENARIOS))
    p.add_argument("--seed", type=int, default=0)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate a benchmark dataset")
    p.add_argument("scenario", choices=sorted(SCENARIOS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n1", type=int, help="rows of table 1")
    p.add_argument("--n2", type=int, help="rows of table 2")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
