"""Command line: ``cablesoup run|validate|list-experiments``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import EXPERIMENTS, ConfigError, load_config, validate
from .experiments import CalibrationError
from .lattice import CapacityError
from .rng import THREADS_ENV, default_threads
from .runner import run

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2, 3

DESCRIPTIONS = {
    "arcsin-check": "two-point frequencies against (2/pi) arcsin of the Green ratio",
    "isomorphism-check": "occupation field vs phi^2/2, and the cluster-sign-resampled field covariance",
    "coupling-equivalence": "loop-route and gff-route two-point frequencies on every vertex pair",
    "twopoint-decay": "r^(d-2) P[0 <-> r e_1] along an axis (exact, no sampling)",
    "highdim-scan": "cluster statistics over a box ladder in d > 6 (gff route)",
    "edge-oracle": "edge zero-hitting calibration on the 2-vertex path",
}


def _load(args) -> dict:
    raw = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        raw["samples"] = args.samples
    if getattr(args, "out", None) is not None:
        raw["output"] = args.out
    return raw


def _print_summary(result) -> None:
    for rec in result.records:
        for name, v in rec.get("verdicts", {}).items():
            tag = "PASS" if v["passed"] else "FAIL"
            if not v.get("asserted", True):
                tag += " (reported)"
            detail = ", ".join(f"{k}={v[k]}" for k in v if k not in ("passed", "asserted") and not isinstance(v[k], (list, dict)))
            print(f"{tag:16s} {rec['experiment']}: {name}  {detail}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cablesoup", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--samples", type=int)
    p_run.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p_run.add_argument("--out", help="JSONL output path")

    p_val = sub.add_parser("validate", help="check a config and print its normalized form")
    p_val.add_argument("config")

    sub.add_parser("list-experiments", help="list experiment names")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(f"{name:22s} {DESCRIPTIONS[name]}")
        return EXIT_OK

    try:
        cfg = validate(_load(args))
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        import yaml
        print(yaml.safe_dump(cfg.echo() | {"output": cfg.output}, sort_keys=True), end="")
        return EXIT_OK

    try:
        result = run(cfg, args.threads or default_threads())
    except (CalibrationError, CapacityError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    _print_summary(result)
    return EXIT_OK if result.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
