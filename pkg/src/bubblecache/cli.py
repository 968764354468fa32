"""Command-line harness: ``bubblecache {gen,likelihood,cutoff,sweep,replay,kurtosis}``.

Every file written here starts with ``#`` comment lines holding the canonical
command that produced it.  Re-running that command reproduces the file byte
for byte.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from ._validation import TIE_POLICIES, parse_duration_ns
from .cache import BubbleCacheConfig, run_trace, write_snapshots
from .experiments import SWEEP_HEADER, qer_sweep, write_sweep
from .likelihood import (
    DEFAULT_MAX_FLOWS,
    DEFAULT_MAX_TOTAL,
    EnumerationBudgetError,
    detect_single_elephant,
    estimated_detection_likelihood,
    exact_detection_likelihood,
)
from .moments import UndefinedKurtosisError, batch_kurtosis
from .sampling import CutoffUnreachableError, find_cutoff_rate, monte_carlo_detection_likelihood
from .traffic import (
    Distribution,
    Metric,
    SingleElephant,
    TraceFormatError,
    TrafficDataset,
    generate_distribution,
    generate_trace,
    read_trace,
    read_truth,
    truth_order,
    write_trace,
    write_truth,
)

PROG = "bubblecache"
DIST_CHOICES = [d.value for d in Distribution] + ["single-elephant"]
DEFAULT_P_GRID = "0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.3,0.5,0.7,1"


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _duration(text: str) -> int:
    try:
        return parse_duration_ns(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _format_value(action: argparse.Action, value) -> str:
    if action.type is _duration:
        for unit, scale in (("s", 10**9), ("ms", 10**6), ("us", 10**3)):
            if value % scale == 0:
                return f"{value // scale}{unit}"
        return f"{value}ns"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def canonical_command(parser: argparse.ArgumentParser, args: argparse.Namespace) -> str:
    """The subcommand line with every option spelled out, defaults included."""
    parts = [PROG, args.command]
    for action in parser._actions:
        if isinstance(action, argparse._HelpAction) or not action.option_strings:
            continue
        value = getattr(args, action.dest, None)
        if value is None or value is False:
            continue
        flag = max(action.option_strings, key=len)
        if value is True:
            parts.append(flag)
        else:
            parts += [flag, _format_value(action, value)]
    return " ".join(parts)


def _header(args) -> list[str]:
    return [f"command: {args.canonical}"]


def _dataset_from_flags(args, parser) -> TrafficDataset:
    if args.dist == "single-elephant":
        if args.m is None or args.n is None:
            parser.error("--dist single-elephant needs --m and --n")
        return generate_distribution(SingleElephant(args.m, args.n))
    if args.flows is None or args.total is None:
        parser.error(f"--dist {args.dist} needs --flows and --total")
    return generate_distribution(args.dist, args.flows, args.total)


def _format_kurtosis(sizes) -> str:
    try:
        return f"{batch_kurtosis(sizes):.4f}"
    except UndefinedKurtosisError:
        return "undefined"


# subcommands


def cmd_gen(args, parser) -> int:
    dataset = _dataset_from_flags(args, parser)
    if args.metric == Metric.BYTES.value:
        dataset = TrafficDataset(dataset.sizes, Metric.BYTES, dataset.label)
    if args.flow_span is not None and args.flow_span > args.duration:
        parser.error("--flow-span cannot exceed --duration")
    trace = generate_trace(dataset, args.seed, args.duration, mtu=args.mtu, flow_span_ns=args.flow_span)
    truth_path = args.truth or _truth_path(args.output)
    write_trace(trace, args.output, _header(args))
    write_truth(dataset, truth_path, _header(args))
    print(f"flows: {dataset.n_flows}")
    print(f"total: {dataset.total}")
    print(f"events: {len(trace)}")
    print(f"excess_kurtosis: {_format_kurtosis(dataset.sizes)}")
    return 0


def _truth_path(trace_path: str) -> str:
    path = Path(trace_path)
    return str(path.with_name(path.stem + ".truth.csv"))


def cmd_likelihood(args, parser) -> int:
    budget = {"max_flows": args.max_flows, "max_total": args.max_total}
    if args.mode == "simple":
        if None in (args.m, args.n, args.k):
            parser.error("--mode simple needs --m, --n and --k")
        print(f"{detect_single_elephant(args.m, args.n, args.k):.6f}")
        return 0
    if args.mode == "estimated":
        if args.counts is None or args.p is None:
            parser.error("--mode estimated needs --counts and --p")
        value = estimated_detection_likelihood(args.counts, args.p, args.alpha, args.tie_policy, **budget)
        print(f"{value:.6f}")
        return 0
    if args.sizes is None:
        parser.error(f"--mode {args.mode} needs --sizes")
    if args.mode == "exact":
        if args.k is None:
            parser.error("--mode exact needs --k")
        value = exact_detection_likelihood(args.sizes, args.k, args.alpha, args.tie_policy, **budget)
        print(f"{value:.6f}")
        return 0
    if (args.k is None) == (args.p is None):
        parser.error("--mode mc needs exactly one of --k and --p")
    q, ci = monte_carlo_detection_likelihood(
        args.sizes, k=args.k, p=args.p, alpha=args.alpha, trials=args.trials, seed=args.seed,
        tie_policy=args.tie_policy,
    )
    print(f"{q:.6f} +/- {ci:.6f}")
    return 0


def cmd_cutoff(args, parser) -> int:
    jobs: list[tuple[str, TrafficDataset]] = []
    if args.truth is not None:
        if args.dist is not None:
            parser.error("give either --truth or --dist, not both")
        _, dataset = truth_order(read_truth(args.truth))
        jobs.append((Path(args.truth).stem, dataset))
    elif args.dist is not None:
        if args.flows is None or args.total is None:
            parser.error("--dist needs --flows and --total")
        for name in args.dist.split(","):
            if name not in DIST_CHOICES[:-1]:
                parser.error(f"unknown distribution {name!r}; choose from {', '.join(DIST_CHOICES[:-1])}")
            jobs.append((name, generate_distribution(name, args.flows, args.total)))
    else:
        parser.error("give --truth or --dist")

    out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
    try:
        if args.output:
            for line in _header(args):
                out.write(f"# {line}\n")
        out.write("dist,alpha,target,p_c,achieved,ci\n")
        for name, dataset in jobs:
            try:
                res = find_cutoff_rate(
                    dataset, args.alpha, args.target, trials=args.trials, seed=args.seed,
                    tie_policy=args.tie_policy, resolution=args.resolution,
                )
            except CutoffUnreachableError as exc:
                print(f"error: {name}: {exc}", file=sys.stderr)
                return 1
            out.write(f"{name},{args.alpha},{args.target:g},{res.p_c:.3f},{res.achieved_likelihood:.6f},{res.ci_halfwidth:.6f}\n")
            out.flush()
    finally:
        if args.output:
            out.close()
    return 0


def cmd_sweep(args, parser) -> int:
    if args.truth is None:
        parser.error("sweep needs --truth")
    trace = read_trace(args.trace)
    truth = read_truth(args.truth)
    points = qer_sweep(
        trace, truth, args.p_grid, repetitions=args.repetitions, alpha=args.alpha, seed=args.seed,
        capacity=args.capacity, window_ns=args.window, metric=args.metric,
    )
    if args.output:
        write_sweep(points, args.output, _header(args))
    else:
        print(SWEEP_HEADER)
        for pt in points:
            print(pt.csv_row())
    return 0


def cmd_replay(args, parser) -> int:
    config = BubbleCacheConfig(
        phi=args.phi,
        delta_p=args.delta_p,
        t_inactive_ns=args.t_inactive,
        t_house_ns=args.t_house,
        p_init=args.p0,
        p_min=args.p_min,
        p_max=args.p_max,
        metric=args.metric,
        alpha_report=args.alpha,
        seed=args.seed,
    )
    trace = read_trace(args.trace)
    truth = read_truth(args.truth) if args.truth else None
    snapshots, report = run_trace(config, trace, truth)
    write_snapshots(snapshots, args.output, _header(args))
    kurt = "nan" if math.isnan(report.kurtosis) else f"{report.kurtosis:.4f}"
    print(f"snapshots: {len(snapshots)}")
    print(f"final_p: {report.p:.6f}")
    print(f"kurtosis: {kurt}")
    print(f"cache_size: {report.cache_size}")
    print("top: " + " ".join(f"{f}:{s}" for f, s in report.top))
    if report.qer is not None:
        print(f"qer: {report.qer:.6f}")
    return 0


def _read_values(path) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            field = text.split(",")[-1]
            try:
                values.append(float(field))
            except ValueError:
                if values:
                    raise TraceFormatError(f"{path}:{lineno}: not a number: {field!r}") from None
                # a header line before the first value
    return values


def cmd_kurtosis(args, parser) -> int:
    sources = [s for s in (args.values, args.truth, args.dist) if s is not None]
    if len(sources) != 1:
        parser.error("give exactly one of --values, --truth or --dist")
    if args.values is not None:
        values = _read_values(args.values)
    elif args.truth is not None:
        values = list(read_truth(args.truth).values())
    else:
        values = list(_dataset_from_flags(args, parser).sizes)
    try:
        print(f"{batch_kurtosis(values):.4f}")
    except UndefinedKurtosisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# parser


def _add_dataset_flags(p: argparse.ArgumentParser, *, choices=DIST_CHOICES, required=False) -> None:
    p.add_argument("--dist", choices=choices, required=required, help="reference flow-size distribution")
    p.add_argument("--flows", type=int, help="number of flows")
    p.add_argument("--total", type=int, help="total size over all flows")
    p.add_argument("--m", type=int, help="single-elephant: elephant size")
    p.add_argument("--n", type=int, help="single-elephant: number of one-packet flows")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Elephant-flow detection under partial information.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    metric_choices = [m.value for m in Metric]

    p = sub.add_parser("gen", help="generate a synthetic trace and its truth file")
    _add_dataset_flags(p, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=_duration, default="10s", help="trace length, e.g. 10s or 500ms")
    p.add_argument("--flow-span", type=_duration, help="confine each flow to a random interval of this length")
    p.add_argument("--metric", choices=metric_choices, default="packets")
    p.add_argument("--mtu", type=int, default=1500, help="bytes per full packet with --metric bytes")
    p.add_argument("-o", "--output", required=True, help="trace CSV path")
    p.add_argument("--truth", help="truth CSV path (default: <output stem>.truth.csv)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("likelihood", help="detection likelihood of a dataset")
    p.add_argument("--mode", choices=["simple", "exact", "estimated", "mc"], required=True)
    p.add_argument("--m", type=int, help="simple: elephant size")
    p.add_argument("--n", type=int, help="simple: number of one-packet flows")
    p.add_argument("--k", type=int, help="number of samples")
    p.add_argument("--p", type=float, help="sampling rate (estimated, mc)")
    p.add_argument("--sizes", type=_int_list, help="true flow sizes, comma separated")
    p.add_argument("--counts", type=_int_list, help="estimated: observed counts, comma separated")
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="strict")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-flows", type=int, default=DEFAULT_MAX_FLOWS, help="exact evaluation budget")
    p.add_argument("--max-total", type=int, default=DEFAULT_MAX_TOTAL, help="exact evaluation budget")
    p.set_defaults(func=cmd_likelihood)

    p = sub.add_parser("cutoff", help="cutoff sampling rate by Monte-Carlo bisection")
    p.add_argument("--dist", help="one or more distributions, comma separated")
    p.add_argument("--flows", type=int)
    p.add_argument("--total", type=int)
    p.add_argument("--truth", help="truth CSV instead of --dist")
    p.add_argument("--alpha", type=int, default=5)
    p.add_argument("--target", type=float, default=0.99)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="tolerant")
    p.add_argument("--resolution", type=int, default=1000, help="rate grid is 1/resolution")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_cutoff)

    p = sub.add_parser("sweep", help="quantum error of fixed-rate sampling over a grid of rates")
    p.add_argument("--trace", required=True)
    p.add_argument("--truth")
    p.add_argument("--p-grid", type=_float_list, default=_float_list(DEFAULT_P_GRID))
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--alpha", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--capacity", type=float, help="sampled events per second the monitor can process")
    p.add_argument("--window", type=_duration, default="50ms", help="capacity accounting window")
    p.add_argument("--metric", choices=metric_choices, default="packets")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="replay a trace through the adaptive cache")
    p.add_argument("--trace", required=True)
    p.add_argument("--truth")
    p.add_argument("--phi", type=float, default=100.0, help="target excess kurtosis")
    p.add_argument("--delta-p", type=float, default=0.01, help="sampling-rate step")
    p.add_argument("--t-inactive", type=_duration, default="20s", help="inactivity timeout")
    p.add_argument("--t-house", type=_duration, default="0.05s", help="housekeeping period")
    p.add_argument("--p0", type=float, default=1.0, help="initial sampling rate")
    p.add_argument("--p-min", type=float, default=1e-5)
    p.add_argument("--p-max", type=float, default=1.0)
    p.add_argument("--metric", choices=metric_choices, default="packets")
    p.add_argument("--alpha", type=int, default=5, help="size of the reported top set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="snapshot CSV path")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("kurtosis", help="excess kurtosis of flow sizes")
    p.add_argument("--values", help="file with one value per line")
    p.add_argument("--truth", help="truth CSV")
    _add_dataset_flags(p)
    p.set_defaults(func=cmd_kurtosis)

    parser._subcommands = sub.choices
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser._subcommands[args.command]
    args.canonical = canonical_command(sub, args)
    try:
        return args.func(args, sub)
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: rerun with --mode mc", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
