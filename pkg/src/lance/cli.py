"""Command line interface.

    lance verify
    lance run --input X.lten --filters W.lten --engine lance-faithful --out Y.lten
    lance bench --config layers.json --out report

Exit codes: 0 ok, 1 verification failure, 2 usage or I/O error. The
``LANCE_THREADS`` environment variable sets the BLAS/OpenMP thread count
(default 1).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from lance.bench import load_config, run_bench, write_report
from lance.engines import ENGINES, LanceConfig, Mode, run_engine
from lance.exceptions import LanceError
from lance.tensor import read_tensor, write_tensor
from lance.verify import format_results, run_checks

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

log = logging.getLogger("lance")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def thread_count():
    raw = os.environ.get("LANCE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise LanceError(f"LANCE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise LanceError(f"LANCE_THREADS must be a positive integer, got {raw!r}")
    return n


def build_parser():
    parser = _Parser(prog="lance", description="Quantized Winograd convolution toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("verify", help="run the built-in correctness checks")

    run = sub.add_parser("run", help="convolve an LTEN tensor with LTEN filters")
    run.add_argument("--input", required=True)
    run.add_argument("--filters", required=True, help="filters stored as a K x R x S x C tensor")
    run.add_argument("--engine", choices=sorted(ENGINES), default="lance-faithful")
    run.add_argument("--bits-w", type=int, default=8)
    run.add_argument("--bits-i", type=int, default=8)
    run.add_argument("--granularity", choices=("tile", "position", "tensor"), default=None,
                     help="default: tile, or position for lance-gemm")
    run.add_argument("--pad", type=int, choices=(0, 1), default=0)
    run.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="benchmark engines on the layers of a JSON config")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True, help="report path; .csv and .json are written")
    bench.add_argument("--repeats", type=int, default=5)
    return parser


def cmd_verify(args):
    results = run_checks()
    print(format_results(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_run(args):
    x = read_tensor(args.input)
    w = read_tensor(args.filters)
    cfg = None
    if args.engine in ("quantized-direct", "lance-faithful", "lance-gemm"):
        gemm = args.engine == "lance-gemm"
        granularity = args.granularity or ("position" if gemm else "tile")
        cfg = LanceConfig(args.bits_w, args.bits_i, granularity, Mode.GEMM if gemm else Mode.FAITHFUL)
    y = run_engine(args.engine, x, w, pad=args.pad, cfg=cfg)
    write_tensor(y, args.out)
    digest = hashlib.sha256(y.tobytes()).hexdigest()
    print(f"output {'x'.join(map(str, y.shape))} (NHWC) -> {args.out}")
    print(f"sha256 {digest}")
    return EXIT_OK


def cmd_bench(args):
    layers = load_config(args.config)
    threads = thread_count()
    rows = run_bench(layers, repeats=args.repeats, threads=threads)
    csv_path, json_path = write_report(rows, args.out, threads=threads)
    print(f"{len(rows)} rows from {len(layers)} layers -> {csv_path}, {json_path}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "run": cmd_run, "bench": cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        with threadpool_limits(limits=thread_count()):
            return COMMANDS[args.command](args)
    except AssertionError as exc:
        print(f"lance: check failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (LanceError, OSError, json.JSONDecodeError) as exc:
        print(f"lance: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
