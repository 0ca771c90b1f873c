"""Command-line front end.

Subcommands::

    agebloom tables   --which {bf,apbf,apbbf} [--aimed FP ...]
    agebloom simulate --kind {apbf,apbbf} --k K --l L (--window W | --m M | --num-blocks N) ...
    agebloom params   --fp FP --window W [--max-npws X]
    agebloom snapshot save --kind KIND --out PATH ...
    agebloom snapshot load --kind KIND PATH

CSV goes to standard output and diagnostics to standard error.  Exit codes:
0 success, 2 usage error, 3 unsatisfiable parameters, 4 I/O error,
5 snapshot parse error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from decimal import ROUND_DOWN, Decimal
from typing import Sequence, TextIO

from .analysis import apbbf_metrics, find_params
from .apbbf import ApbbfFilter
from .apbf import ApbfFilter, size_for_window
from .bloom_baseline import bf_dimension, bf_metrics
from .errors import InvalidParameterError, NoConfigurationError, SnapshotError
from .workload import FilterConfig, StreamSpec, gen_ids, hash_ids, measure_fp

EXIT_USAGE = 2
EXIT_UNSATISFIABLE = 3
EXIT_IO = 4
EXIT_PARSE = 5

DEFAULT_AIMED = (0.1, 0.01, 0.001, 0.0001, 0.00001)
APBF_ROWS_PER_TARGET = 5
APBBF_CONFIGS = tuple(
    (k, l, B, b)
    for b in (4, 8)
    for k, l in ((2, 3), (2, 5), (3, 5), (3, 8))
    for B in (64, 512)
)


def _fixed(x: float, places: int) -> str:
    return f"{x:.{places}f}"


def _truncated(x: float, places: int) -> str:
    return str(Decimal(repr(x)).quantize(Decimal(1).scaleb(-places), rounding=ROUND_DOWN))


def _sig(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.6g}"


def _aimed(x: float) -> str:
    return f"{x:g}"


# -- tables -------------------------------------------------------------------


def _table_bf(aimed: Sequence[float], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["aimed_fp", "k", "bits_per_item", "actual_fp", "acc_true", "acc_false"])
    for a in aimed:
        k, _, _ = bf_dimension(a, 1)
        r = bf_metrics(k)
        w.writerow(
            [_aimed(a), r.k, _truncated(r.bits_per_item, 2), _truncated(r.fp, 10), _fixed(r.acc_true, 2), _fixed(r.acc_false, 2)]
        )


def _table_apbf(aimed: Sequence[float], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["aimed_fp", "k", "l", "actual_fp", "eff", "acc_window", "acc_fp", "acc_false", "npws"])
    for a in aimed:
        for r in find_params(a)[:APBF_ROWS_PER_TARGET]:
            w.writerow(
                [
                    _aimed(a), r.k, r.l, _fixed(r.fp, 6), _fixed(r.eff, 2), _fixed(r.acc_window, 2),
                    _fixed(r.acc_fp, 2), _fixed(r.acc_false, 2), _fixed(r.npws, 2),
                ]
            )


def _table_apbbf(out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "l", "B", "b", "actual_fp", "apbf_fp", "cap", "acc_window", "acc_fp", "acc_false", "npws"])
    for k, l, B, b in APBBF_CONFIGS:
        r = apbbf_metrics(k, l, B, b)
        w.writerow(
            [
                k, l, B, b, _fixed(r.fp, 7), _fixed(r.apbf_fp, 7), _fixed(r.cap, 3), _fixed(r.acc_window, 2),
                _fixed(r.acc_fp, 2), _fixed(r.acc_false, 2), _fixed(r.npws, 2),
            ]
        )


def cmd_tables(args: argparse.Namespace, out: TextIO) -> int:
    aimed = args.aimed or DEFAULT_AIMED
    if args.which == "bf":
        _table_bf(aimed, out)
    elif args.which == "apbf":
        _table_apbf(aimed, out)
    else:
        _table_apbbf(out)
    return 0


# -- simulate -----------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace, out: TextIO) -> int:
    config = FilterConfig(
        kind=args.kind,
        k=args.k,
        l=args.l,
        window=args.window,
        m=args.m,
        num_blocks=args.num_blocks,
        B=args.B,
        b=args.b,
        seed=args.seed,
    )
    spec = StreamSpec(
        length=args.inserts,
        dup_rate=args.dup_rate,
        distribution="uniform" if args.zipf is None else "zipf",
        zipf_exponent=1.0 if args.zipf is None else args.zipf,
        seed=args.seed,
        window=args.window or config.build().window,
    )
    report = measure_fp(config, spec, args.probes, args.sample_every, probe_seed=args.seed + 1)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "measured_fp", "mean_probes", "false_negatives"])
    for s in report.fp_series:
        w.writerow([s.n, _sig(s.fp), _sig(s.mean_probes), s.false_negatives])
    if report.false_negative_count:
        print(f"warning: {report.false_negative_count} false negatives", file=sys.stderr)
    return 0


# -- params -------------------------------------------------------------------


def cmd_params(args: argparse.Namespace, out: TextIO) -> int:
    rows = find_params(args.fp, max_k_plus_l=args.max_slices, max_npws=args.max_npws)
    default = min(rows, key=lambda r: (r.k + r.l, r.k))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["default", "k", "l", "m", "g", "memory_bits", "bits_per_element", "fp", "eff", "npws"])
    for r in rows:
        m = size_for_window(r.k, r.l, args.window)
        g = math.floor(m * math.log(2) / r.k)
        bits = (r.k + r.l) * m
        w.writerow(
            [
                "*" if r is default else "", r.k, r.l, m, g, bits, _fixed(bits / args.window, 2),
                _fixed(r.fp, 6), _fixed(r.eff, 2), _fixed(r.npws, 2),
            ]
        )
    return 0


# -- snapshot -----------------------------------------------------------------


def _describe(kind: str, f) -> str:
    common = f"k={f.k} l={f.l} g={f.g} n={f.n} base={f.base} seed={f.seed}"
    if kind == "apbf":
        return f"kind=apbf {common} m={f.m}"
    return f"kind=apbbf {common} num_blocks={f.num_blocks} B={f.B} b={f.b}"


def cmd_snapshot(args: argparse.Namespace, out: TextIO) -> int:
    cls = ApbfFilter if args.kind == "apbf" else ApbbfFilter
    if args.action == "save":
        config = FilterConfig(
            kind=args.kind, k=args.k, l=args.l, window=args.window, m=args.m,
            num_blocks=args.num_blocks, B=args.B, b=args.b, seed=args.seed,
        )
        f = config.build()
        if args.inserts:
            f.add_hashed(*hash_ids(gen_ids(StreamSpec(length=args.inserts, seed=args.seed)), f.seed))
        with open(args.path, "wb") as fh:
            fh.write(f.snapshot())
    else:
        with open(args.path, "rb") as fh:
            data = fh.read()
        f = cls.restore(data)
    print(_describe(args.kind, f), file=out)
    return 0


# -- parser -------------------------------------------------------------------


def _probability(text: str) -> float:
    x = float(text)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return x


def _positive(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return x


def _add_filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("apbf", "apbbf"), required=True)
    p.add_argument("--k", type=_positive, required=True)
    p.add_argument("--l", type=int, required=True)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--window", type=_positive)
    size.add_argument("--m", type=_positive, help="bits per slice (apbf)")
    size.add_argument("--num-blocks", type=_positive, help="blocks per segment (apbbf)")
    p.add_argument("--B", type=_positive, help="bits per block (apbbf)")
    p.add_argument("--b", type=_positive, help="bits set per block (apbbf)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agebloom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tables", help="analytic metric tables as CSV")
    p.add_argument("--which", choices=("bf", "apbf", "apbbf"), required=True)
    p.add_argument("--aimed", type=_probability, nargs="+")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("simulate", help="stream simulation, one CSV row per sample")
    _add_filter_args(p)
    p.add_argument("--inserts", type=int, required=True)
    p.add_argument("--probes", type=int, default=10000, help="fresh probes per sample")
    p.add_argument("--sample-every", type=_positive, help="default: generation size")
    p.add_argument("--dup-rate", type=float, default=0.0)
    p.add_argument("--zipf", type=float, metavar="EXPONENT", help="Zipf-ranked duplicates")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("params", help="candidate (k, l) configurations")
    p.add_argument("--fp", type=_probability, required=True)
    p.add_argument("--window", type=_positive, required=True)
    p.add_argument("--max-npws", type=float)
    p.add_argument("--max-slices", type=_positive, default=128, help="upper bound on k + l")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("snapshot", help="save or inspect filter snapshots")
    actions = p.add_subparsers(dest="action", required=True)
    save = actions.add_parser("save")
    _add_filter_args(save)
    save.add_argument("--inserts", type=int, default=0, help="distinct elements to insert first")
    save.add_argument("--out", dest="path", required=True)
    load = actions.add_parser("load")
    load.add_argument("--kind", choices=("apbf", "apbbf"), required=True)
    load.add_argument("path")
    p.set_defaults(func=cmd_snapshot)
    return parser


def _check_combination(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if getattr(args, "k", None) is None or not hasattr(args, "num_blocks"):
        return
    if args.kind == "apbf" and (args.B is not None or args.b is not None or args.num_blocks is not None):
        parser.error("--B, --b and --num-blocks require --kind apbbf")
    if args.kind == "apbbf" and (args.B is None or args.b is None):
        parser.error("--kind apbbf requires --B and --b")
    if args.kind == "apbbf" and args.m is not None:
        parser.error("--m applies to --kind apbf only")
    if args.l < 0:
        parser.error("--l must be >= 0")


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_combination(parser, args)
    out = out or sys.stdout
    try:
        return args.func(args, out)
    except NoConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSATISFIABLE
    except SnapshotError as exc:
        print(f"error: cannot parse snapshot: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
