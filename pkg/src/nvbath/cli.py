"""Command-line entry point.

Verbs map one-to-one onto the experiment drivers:

    nvbath trace     -c scenario.ini         observable trajectories
    nvbath histogram -c scenario.ini         per-bath fidelity table
    nvbath benchmark -c scenario.ini         expansion orders vs exact oracle
    nvbath optimize  -c scenario.ini         pulse-sequence search
    nvbath bath-gen  -c scenario.ini         sampled bath geometries

Exit codes: 0 success, 2 configuration problem, 3 model guard tripped
(e.g. a bath too large for the exact oracle), 4 optimizer finished below
its target fidelity.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ConfigError, load_config
from .experiments import (BATH_HEADER, BENCHMARK_HEADER, HISTOGRAM_HEADER,
                          TRACE_HEADER, format_value, run_bath_gen,
                          run_benchmark, run_histogram, run_optimize,
                          run_trace, write_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_BELOW_TARGET = 4

#: --paper-scale raises the histogram workload to publication statistics
_PAPER_SCALE_BATHS = 300
_PAPER_SCALE_SAMPLES = 200


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvbath",
        description="spin-register simulations in an electron-spin bath")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, blurb in (("trace", "time traces of register observables"),
                        ("histogram", "bath-averaged fidelity statistics"),
                        ("benchmark", "expansion error against exact oracle"),
                        ("optimize", "search for an entangling sequence"),
                        ("bath-gen", "write sampled bath positions")):
        p = sub.add_parser(verb, help=blurb)
        p.add_argument("-c", "--config", required=True, metavar="PATH",
                       help="scenario file (INI format)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario master seed")
        p.add_argument("--out", default=None, metavar="PATH",
                       help="override the scenario output path")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="worker threads for independent bath tasks")
        if verb == "histogram":
            p.add_argument("--paper-scale", action="store_true",
                           help=f"force {_PAPER_SCALE_BATHS} baths per "
                                f"density and {_PAPER_SCALE_SAMPLES} bath "
                                "states per bath")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.out is not None:
            out = args.out
            if os.path.isdir(out):  # --out DIR keeps the configured filename
                out = os.path.join(out, os.path.basename(cfg.out_path))
            cfg = dataclasses.replace(cfg, out_path=out)
        if getattr(args, "paper_scale", False):
            cfg = dataclasses.replace(cfg,
                                      baths_per_density=_PAPER_SCALE_BATHS,
                                      n_samples=_PAPER_SCALE_SAMPLES)
    except ConfigError as exc:
        print(f"nvbath: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _dispatch(args.verb, cfg, max(1, args.jobs))
    except (RuntimeError, ValueError) as exc:
        print(f"nvbath: {exc}", file=sys.stderr)
        return EXIT_GUARD


def _dispatch(verb: str, cfg, jobs: int) -> int:
    if verb == "trace":
        res = run_trace(cfg, jobs)
        write_csv(cfg.out_path, res.meta, TRACE_HEADER, res.rows)
        if res.optimizer is not None and res.optimizer.below_target:
            return EXIT_BELOW_TARGET
    elif verb == "histogram":
        res = run_histogram(cfg, jobs)
        write_csv(cfg.out_path, res.meta, HISTOGRAM_HEADER, res.rows)
    elif verb == "benchmark":
        res = run_benchmark(cfg, jobs)
        write_csv(cfg.out_path, res.meta, BENCHMARK_HEADER, res.rows)
    elif verb == "optimize":
        res = run_optimize(cfg, jobs)
        lines = ["# nvbath optimize"] + [
            f"# {k} = {format_value(v)}" for k, v in res.meta] + [res.table_text]
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        if res.result.below_target:
            print(f"nvbath: optimizer stopped below target "
                  f"(best {res.result.fidelity:.6f})", file=sys.stderr)
            return EXIT_BELOW_TARGET
    elif verb == "bath-gen":
        meta, rows = run_bath_gen(cfg, jobs)
        write_csv(cfg.out_path, meta, BATH_HEADER, rows)
    else:  # pragma: no cover - argparse restricts the verb set
        raise ValueError(f"unknown verb {verb!r}")
    print(f"nvbath: wrote {cfg.out_path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
