"""Command line entry point: ``beamkalman run ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

from .config import BEAMFORMER_KINDS, PRESETS, load_config
from .experiment import run_experiment, scenario_statistics
from .output import write_outputs

log = logging.getLogger("beamkalman")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _kinds(text: str) -> tuple[str, ...]:
    kinds = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [k for k in kinds if k not in BEAMFORMER_KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown beamformer(s) {bad}; choose from {BEAMFORMER_KINDS}")
    return kinds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamkalman", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo experiment and write CSV outputs")
    run.add_argument("--config", help="YAML configuration file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--preset", choices=sorted(PRESETS), help="base scenario (default: desk)")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--dims", type=_int_list, help="comma-separated beamspace dimensions")
    run.add_argument("--beamformer", type=_kinds, help="comma-separated kinds: " + ",".join(BEAMFORMER_KINDS))
    run.add_argument("--workers", type=int, help="parallel trial workers")
    run.add_argument("--plot-script", action="store_true", help="also write plot_results.py")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    base = PRESETS[args.preset or "desk"]()
    config = load_config(args.config, base) if args.config else base
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "dims": args.dims,
        "beamformers": args.beamformer,
        "workers": args.workers,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    try:
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    rows, plans = run_experiment(config, scenario_statistics(config))
    paths = write_outputs(config, rows, plans, args.out, args.plot_script)
    log.info("%d rows in %.1fs", len(rows), time.perf_counter() - start)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
