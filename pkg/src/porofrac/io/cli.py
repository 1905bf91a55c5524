"""
Command-line interface: ``porofrac run | verify | inspect``.

Exit status is 0 on success, 1 when a verification fails or a run
aborts, and 2 for usage errors, unreadable files and invalid scenarios.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, PorofracError
from .config import load_scenario, serialize_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    from ..benchmarks import BENCHMARKS

    p = _Parser(prog="porofrac", description="Phase-field hydraulic fracture simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", help="scenario file")
    r.add_argument("--output-dir", help="directory for CSV and VTK output")
    r.add_argument("--threads", type=_positive_int,
                   help="worker threads (default: $POROFRAC_THREADS or 1)")
    r.add_argument("--dt-override", type=_positive_float, help="replace the scenario time step [s]")

    v = sub.add_parser("verify", help="run a built-in benchmark against its reference")
    v.add_argument("benchmark", choices=sorted(BENCHMARKS))
    v.add_argument("--output-dir", help="also write the benchmark run's output here")
    v.add_argument("--threads", type=_positive_int)

    i = sub.add_parser("inspect", help="validate a scenario and print the resolved config")
    i.add_argument("scenario", help="scenario file")
    return p


def _load(path):
    if not Path(path).is_file():
        print(f"porofrac: no such scenario file: {path}", file=sys.stderr)
        return None
    try:
        return load_scenario(path)
    except ConfigError as exc:
        print(f"porofrac: invalid scenario {path}: {exc}", file=sys.stderr)
        return None


def _run(args):
    from ..scenario import run_scenario

    cfg = _load(args.scenario)
    if cfg is None:
        return EXIT_USAGE
    out = args.output_dir if args.output_dir is not None else cfg.outputs.output_dir
    try:
        res = run_scenario(cfg, output_dir=out, threads=args.threads, dt_override=args.dt_override,
                           keep_reports=False)
    except PorofracError as exc:
        print(f"porofrac: run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{cfg.name}: {len(res.records)} steps to t={res.state.time:.6g} s, output in {out}")
    return EXIT_OK


def _verify(args):
    from ..benchmarks import run_benchmark

    try:
        res = run_benchmark(args.benchmark, output_dir=args.output_dir, threads=args.threads)
    except PorofracError as exc:
        print(f"porofrac: benchmark failed to run: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"benchmark {res.name} ({res.wall_time:.1f} s)")
    print(res.table())
    print("PASS" if res.passed else "FAIL")
    return EXIT_OK if res.passed else EXIT_FAIL


def _inspect(args):
    cfg = _load(args.scenario)
    if cfg is None:
        return EXIT_USAGE
    sys.stdout.write(serialize_scenario(cfg))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _run, "verify": _verify, "inspect": _inspect}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
