"""Command-line front end: ``robust-rating <command> [flags]``.

Exit codes: 0 success, 1 selftest failure, 2 usage error, 3 computation
error, 4 I/O or input-data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aggregators import AGGREGATOR_NAMES, AggregatorSpec, InconsistentCounts
from .dataio import (
    BadScale,
    BadTotal,
    CurvePoint,
    OutOfRange,
    ParseError,
    build_histogram,
    format_curve_csv,
    read_ratings_csv,
    render_svg_line_chart,
    write_report_json,
)
from .model import InformationStructure, ObservedHistogram
from .regret import (
    ASYMPTOTIC,
    DEFAULT_FAMILIES,
    GAP,
    REGRET_KINDS,
    EnumerationTooLarge,
    Family,
    NoReports,
    adversary_search,
    lower_bound,
)
from .sampling import RngSpec, simulate

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3, 4
LOWER_BOUND_SERIES = "lower_bound"
THREADS_ENV = "ROBUST_RATING_THREADS"
REMAPPED_SCALE = 7


class UsageError(ValueError):
    pass


@dataclass
class CliConfig:
    command: str
    m: int | None = None
    n: int | None = None
    q: float | None = None
    seed: int = 0
    trials: int | None = None
    grid_step: float = 1e-3
    families: tuple = DEFAULT_FAMILIES
    aggregators: tuple = ()
    input: str | None = None
    output: str | None = None
    svg: str | None = None
    asymptotic: bool = False
    remap: bool = False
    kind: str = GAP
    a_star: float | None = None
    q_grid: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n_or_asymptotic(self):
        return ASYMPTOTIC if self.asymptotic else self.n


# -- parsing --------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_q_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma list of q values."""
    if ":" not in text:
        return _float_list(text)
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--q-grid expects start:stop:step, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("--q-grid step must be positive")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(max(count, 0))]


def parse_families(text: str) -> tuple:
    if text == "all":
        return tuple(Family)
    try:
        return tuple(Family(x.strip()) for x in text.split(","))
    except ValueError:
        choices = ", ".join([f.value for f in Family] + ["all"])
        raise argparse.ArgumentTypeError(f"unknown family in {text!r}; choose from {choices}") from None


def _common(p: argparse.ArgumentParser, *flags: str) -> None:
    opts = {
        "m": dict(type=int, help="rating scale size (ratings 1..m)"),
        "n": dict(type=int, help="number of raters (required for BEA)"),
        "q": dict(type=float, help="lower bound on the participation probability, in (0, 1]"),
        "seed": dict(type=int, default=0, help="RNG seed (default 0)"),
        "trials": dict(type=int, help="Monte Carlo trials; switches exact enumeration to simulation"),
        "grid-step": dict(type=float, default=1e-3, help="adversary grid resolution (default 1e-3)"),
        "family": dict(type=parse_families, default=DEFAULT_FAMILIES,
                       help="two-point, uniform-g, general, all, or a comma list (default two-point,uniform-g)"),
        "asymptotic": dict(action="store_true", help="evaluate in the n -> infinity limit"),
        "kind": dict(choices=REGRET_KINDS, default=GAP, help="regret form (default gap)"),
        "a-star": dict(type=float, help="override BEA's a* instead of solving for it"),
        "output": dict(help="output file"),
    }
    for name in flags:
        p.add_argument(f"--{name}", **opts[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-rating",
        description="Rating aggregation robust to participation bias.")
    sub = parser.add_subparsers(dest="command", required=True)

    agg = sub.add_parser("aggregate", help="score a histogram or a rating file")
    _common(agg, "m", "n", "q", "a-star", "output")
    agg.add_argument("--aggregators", type=lambda s: tuple(s.split(",")), default=("avg", "paa"),
                     help="comma list from avg,spe,bea,paa (default avg,paa)")
    agg.add_argument("--hist", type=_int_list, help="inline observed counts n_1,...,n_m")
    agg.add_argument("--input", help="CSV file with one rating per row")
    agg.add_argument("--column", default="rating", help="rating column name (default rating)")
    agg.add_argument("--remap", action="store_true", help="map 1..10 ratings onto 1..7 before aggregating")

    curve = sub.add_parser("curve", help="worst-case regret against q for several aggregators")
    _common(curve, "m", "n", "seed", "trials", "grid-step", "family", "asymptotic", "kind", "output")
    curve.add_argument("--q-grid", type=parse_q_grid, required=True, help="start:stop:step or comma list")
    curve.add_argument("--aggregators", type=lambda s: tuple(s.split(",")),
                       default=("avg", "bea", "paa", LOWER_BOUND_SERIES),
                       help="comma list from avg,spe,bea,paa,lower_bound")
    curve.add_argument("--svg", help="also draw ln regret against q as SVG")

    lb = sub.add_parser("lower-bound", help="worst-case regret lower bound and a*")
    _common(lb, "m", "n", "q")

    wc = sub.add_parser("worst-case", help="adversary search for one aggregator")
    wc.add_argument("aggregator", choices=AGGREGATOR_NAMES)
    _common(wc, "m", "n", "q", "seed", "trials", "grid-step", "family", "asymptotic", "kind",
            "a-star", "output")

    sim = sub.add_parser("simulate", help="draw a full and an observed histogram")
    _common(sim, "n", "seed", "output")
    sim.add_argument("--p", type=_float_list, required=True, help="rating distribution p_1,...,p_m")
    sim.add_argument("--g", type=_float_list, required=True, help="participation probabilities g_1,...,g_m")

    sub.add_parser("selftest", help="run the fast acceptance checks")
    return parser


def _config(args: argparse.Namespace) -> CliConfig:
    get = lambda name, default=None: getattr(args, name, default)  # noqa: E731
    return CliConfig(
        command=args.command, m=get("m"), n=get("n"), q=get("q"), seed=get("seed", 0),
        trials=get("trials"), grid_step=get("grid_step", 1e-3),
        families=get("family", DEFAULT_FAMILIES), aggregators=tuple(get("aggregators", ()) or ()),
        input=get("input"), output=get("output"), svg=get("svg"),
        asymptotic=bool(get("asymptotic", False)), remap=bool(get("remap", False)),
        kind=get("kind", GAP), a_star=get("a_star"), q_grid=tuple(get("q_grid", ()) or ()),
        extra={k: get(k) for k in ("hist", "column", "aggregator", "p", "g")},
    )


def _check_q(q) -> None:
    if q is None:
        raise UsageError("--q is required")
    if not 0 < q <= 1:
        raise UsageError(f"q must lie in (0, 1], got {q}")


def _check_m(m) -> None:
    if m is None:
        raise UsageError("--m is required")
    if m < 2:
        raise UsageError(f"m must be >= 2, got {m}")


def _check_search(cfg: CliConfig, names) -> None:
    _check_m(cfg.m)
    if cfg.asymptotic and cfg.n is not None:
        raise UsageError("--asymptotic and --n are mutually exclusive")
    if not cfg.asymptotic and cfg.n is None:
        raise UsageError("give --n or --asymptotic")
    if cfg.n is not None and cfg.n < 1:
        raise UsageError("n must be >= 1")
    if cfg.trials is not None and cfg.trials < 1:
        raise UsageError("trials must be >= 1")
    if cfg.asymptotic and cfg.trials:
        raise UsageError("--trials has no meaning with --asymptotic")
    if not 0 < cfg.grid_step <= 0.5:
        raise UsageError("--grid-step must lie in (0, 0.5]")
    if Family.GENERAL in cfg.families and cfg.m > 3:
        raise UsageError("the general family supports m <= 3 only")
    if cfg.asymptotic and "bea" in names:
        raise UsageError("BEA requires a finite, known n; drop --asymptotic or bea")
    if cfg.asymptotic and LOWER_BOUND_SERIES in names:
        raise UsageError("the lower bound needs a finite n; drop --asymptotic or lower_bound")


def validate(cfg: CliConfig) -> None:
    """Reject invalid flag combinations before any computation."""
    if cfg.command == "aggregate":
        bad = [a for a in cfg.aggregators if a not in AGGREGATOR_NAMES]
        if bad or not cfg.aggregators:
            raise UsageError(f"unknown aggregator(s) {bad}; choose from {','.join(AGGREGATOR_NAMES)}")
        _check_q(cfg.q)
        hist, has_input = cfg.extra["hist"], cfg.input is not None
        if hist is None and not has_input:
            raise UsageError("give --hist or --input")
        if hist is not None and has_input:
            raise UsageError("--hist and --input are mutually exclusive")
        if hist is not None and (len(hist) < 2 or min(hist) < 0):
            raise UsageError("--hist needs at least two nonnegative counts")
        if hist is not None and cfg.m is not None and cfg.m != len(hist):
            raise UsageError(f"--m {cfg.m} does not match the {len(hist)} counts in --hist")
        if has_input and cfg.m is None and not cfg.remap:
            raise UsageError("--m is required with --input (or use --remap for the 1..7 scale)")
        if cfg.m is not None:
            _check_m(cfg.m)
        if "bea" in cfg.aggregators and cfg.n is None:
            raise UsageError("BEA requires the total number of raters: pass --n")
        if cfg.a_star is not None and not 0 <= cfg.a_star <= 1:
            raise UsageError("--a-star must lie in [0, 1]")
    elif cfg.command == "curve":
        allowed = AGGREGATOR_NAMES + (LOWER_BOUND_SERIES,)
        bad = [a for a in cfg.aggregators if a not in allowed]
        if bad or not cfg.aggregators:
            raise UsageError(f"unknown series {bad}; choose from {','.join(allowed)}")
        if not cfg.q_grid:
            raise UsageError("--q-grid is empty")
        for q in cfg.q_grid:
            _check_q(q)
        _check_search(cfg, cfg.aggregators)
    elif cfg.command == "lower-bound":
        _check_m(cfg.m)
        _check_q(cfg.q)
        if cfg.n is None or cfg.n < 1:
            raise UsageError("--n >= 1 is required")
    elif cfg.command == "worst-case":
        _check_q(cfg.q)
        _check_search(cfg, (cfg.extra["aggregator"],))
        if cfg.a_star is not None and not 0 <= cfg.a_star <= 1:
            raise UsageError("--a-star must lie in [0, 1]")
    elif cfg.command == "simulate":
        p, g = cfg.extra["p"], cfg.extra["g"]
        if len(p) != len(g):
            raise UsageError(f"--p has {len(p)} entries but --g has {len(g)}")
        if cfg.n is None or cfg.n < 0:
            raise UsageError("--n >= 0 is required")


# -- commands -----------------------------------------------------------------------


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_histogram(cfg: CliConfig) -> ObservedHistogram:
    hist = cfg.extra["hist"]
    if hist is not None:
        counts = np.asarray(hist)
        if cfg.n is not None and cfg.n < counts.sum():
            raise BadTotal(f"n={cfg.n} is smaller than the {counts.sum()} observed ratings")
        n_u = cfg.n - int(counts.sum()) if cfg.n is not None else 0
        return ObservedHistogram(counts, n_u)
    records = read_ratings_csv(cfg.input, column=cfg.extra["column"], remap=cfg.remap)
    m = cfg.m if cfg.m is not None else REMAPPED_SCALE
    return build_histogram(records, m, cfg.n)


def cmd_aggregate(cfg: CliConfig) -> int:
    h = _load_histogram(cfg)
    scores = {}
    for name in cfg.aggregators:
        spec = AggregatorSpec.make(name, cfg.q, n=h.n if name == "bea" else None, m=h.m,
                                   a_star=cfg.a_star)
        scores[name] = spec(h)
    for name, value in scores.items():
        print(f"{name}={value:.6f}")
    if cfg.output:
        report = {"m": h.m, "q": cfg.q, "counts": h.counts.tolist(), "n_u": h.n_u, "scores": scores}
        if "bea" in scores:
            report["a_star"] = AggregatorSpec.make("bea", cfg.q, n=h.n, m=h.m, a_star=cfg.a_star).bea.a_star
        with open(cfg.output, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _curve_cell(args) -> list[CurvePoint]:
    cfg, q = args
    n = cfg.n_or_asymptotic
    points = []
    for name in cfg.aggregators:
        if name == LOWER_BOUND_SERIES:
            value = lower_bound(cfg.n, cfg.m, q)[0]
        else:
            agg = AggregatorSpec.make(name, q, n=None if cfg.asymptotic else cfg.n, m=cfg.m)
            value = adversary_search(agg, n, cfg.m, q, families=cfg.families, step=cfg.grid_step,
                                     kind=cfg.kind, trials=cfg.trials, seed=cfg.seed).regret
        points.append(CurvePoint(q, name, value))
    return points


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None


def cmd_curve(cfg: CliConfig) -> int:
    cells = [(cfg, q) for q in cfg.q_grid]
    workers = min(worker_count(), len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_curve_cell, cells))
    else:
        rows = [_curve_cell(c) for c in cells]
    points = [pt for row in rows for pt in row]
    _emit(format_curve_csv(points), cfg.output)
    if cfg.svg:
        render_svg_line_chart(points, cfg.svg)
    return EXIT_OK


def cmd_lower_bound(cfg: CliConfig) -> int:
    value, a_star = lower_bound(cfg.n, cfg.m, cfg.q)
    print(f"value={value:.6f} a*={a_star:.3f}")
    return EXIT_OK


def cmd_worst_case(cfg: CliConfig) -> int:
    agg = AggregatorSpec.make(cfg.extra["aggregator"], cfg.q, n=None if cfg.asymptotic else cfg.n,
                              m=cfg.m, a_star=cfg.a_star)
    record = adversary_search(agg, cfg.n_or_asymptotic, cfg.m, cfg.q, families=cfg.families,
                              step=cfg.grid_step, kind=cfg.kind, trials=cfg.trials, seed=cfg.seed)
    if cfg.output:
        write_report_json(record, cfg.output)
    print(json.dumps(record.to_dict(), indent=2))
    return EXIT_OK


def cmd_simulate(cfg: CliConfig) -> int:
    p, g = np.asarray(cfg.extra["p"]), np.asarray(cfg.extra["g"])
    theta = InformationStructure.from_arrays(p, g)
    full, observed = simulate(theta, cfg.n, RngSpec(cfg.seed))
    lines = ["rating,full,observed"]
    lines += [f"{r},{f},{o}" for r, f, o in zip(range(1, theta.m + 1), full.counts, observed.counts)]
    _emit("\n".join(lines) + "\n", cfg.output)
    if cfg.output:
        avg = AggregatorSpec("avg")(observed)
        print(f"n={cfg.n} observed={observed.n_observed} unobserved={observed.n_u} observed_avg={avg:.6f}")
    return EXIT_OK


def cmd_selftest(cfg: CliConfig) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAILED


COMMANDS = {
    "aggregate": cmd_aggregate,
    "curve": cmd_curve,
    "lower-bound": cmd_lower_bound,
    "worst-case": cmd_worst_case,
    "simulate": cmd_simulate,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _config(args)
    try:
        validate(cfg)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"robust-rating: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationTooLarge as exc:
        print(f"robust-rating: error: {exc} (try --trials N)", file=sys.stderr)
        return EXIT_COMPUTE
    except (NoReports, InconsistentCounts) as exc:
        print(f"robust-rating: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (OSError, ParseError, OutOfRange, BadScale, BadTotal) as exc:
        print(f"robust-rating: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"robust-rating: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
