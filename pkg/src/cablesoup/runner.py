"""Execute a validated config and persist its records."""
from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .experiments import FORMAT_VERSION, REGISTRY, ExperimentResult
from .rng import default_threads


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def dumps(record: dict) -> str:
    return json.dumps(_plain(record), sort_keys=True, separators=(",", ":"))


def run(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Run the named experiment and write JSONL (and optional CSV) output.

    The ``runtime`` block (wall clock, worker count) is the only part of a
    record that may differ between reruns of the same config and seed.
    """
    threads = threads or default_threads()
    t0 = time.perf_counter()
    result = REGISTRY[cfg.experiment](cfg, threads)
    wall = time.perf_counter() - t0
    for rec in result.records:
        rec["runtime"] = {"wall_clock_s": round(wall, 3), "threads": threads}
    if cfg.output:
        out = Path(cfg.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            for rec in result.records:
                fh.write(dumps(rec) + "\n")
    if cfg.per_sample_csv and result.csv_rows:
        write_csv(cfg, result.csv_rows)
    return result


def write_csv(cfg: ExperimentConfig, rows: list[dict]) -> None:
    path = Path(cfg.per_sample_csv)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0])
    with open(path, "w", newline="") as fh:
        fh.write("# " + dumps({"format_version": FORMAT_VERSION, "config": cfg.echo()}) + "\n")
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow(_plain(r))


def strip_runtime(line: str) -> str:
    rec = json.loads(line)
    rec.pop("runtime", None)
    return dumps(rec)
