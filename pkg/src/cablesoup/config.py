"""Experiment configuration: loading, defaults and validation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .estimators import CI_LEVEL, KS_P_MIN, Z_MAX
from .rng import DEFAULT_BLOCK_SIZE

EXPERIMENTS = (
    "arcsin-check",
    "isomorphism-check",
    "coupling-equivalence",
    "twopoint-decay",
    "highdim-scan",
    "edge-oracle",
)
ROUTES = ("gff", "loopsoup", "both")

DEFAULT_THRESHOLDS = {
    "z_max": Z_MAX,
    "ks_p_min": KS_P_MIN,
    "ci_level": CI_LEVEL,
    "pair_fraction": 0.9,
    "plateau_ratio": 1.5,
    "max_ratio_spread": 10.0,
    "integral_tol": 1e-6,
}

# samples per experiment at each preset
PRESET_SAMPLES = {
    "smoke": {
        "arcsin-check": 20_000, "isomorphism-check": 20_000, "coupling-equivalence": 20_000,
        "twopoint-decay": 1, "highdim-scan": 10, "edge-oracle": 20_000,
    },
    "full": {
        "arcsin-check": 100_000, "isomorphism-check": 100_000, "coupling-equivalence": 100_000,
        "twopoint-decay": 1, "highdim-scan": 200, "edge-oracle": 100_000,
    },
}

DEFAULT_ROUTE = {
    "arcsin-check": "gff", "isomorphism-check": "both", "coupling-equivalence": "both",
    "twopoint-decay": "gff", "highdim-scan": "gff", "edge-oracle": "gff",
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass
class ExperimentConfig:
    experiment: str
    d: int
    domain: str = "box"
    N: tuple[int, ...] = ()
    k: int | None = None
    route: str = "gff"
    samples: int = 1
    seed: int = 0
    kappa: float = 2.0
    thresholds: dict = field(default_factory=dict)
    output: str | None = None
    per_sample_csv: str | None = None
    block_size: int = DEFAULT_BLOCK_SIZE
    preset: str = "full"
    pairs: list | None = None
    radii: list | None = None
    plateau: list | None = None

    def domain_dict(self, N: int | None = None) -> dict:
        if self.domain == "path":
            return {"kind": "path", "k": self.k}
        return {"kind": "box", "d": self.d, "N": self.N[0] if N is None else N}

    def echo(self) -> dict:
        """Result-affecting fields, for embedding in records."""
        out = asdict(self)
        out["N"] = list(self.N)
        out.pop("output")
        out.pop("per_sample_csv")
        return out


def load_config(path: str | Path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return raw


def _int(raw, key, errors, minimum=None):
    val = raw.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        errors.append(f"{key}: expected an integer, got {val!r}")
        return None
    if minimum is not None and val < minimum:
        errors.append(f"{key}: must be >= {minimum}, got {val}")
        return None
    return val


def validate(raw: dict) -> ExperimentConfig:
    """Normalize a raw config mapping; every problem is reported at once."""
    errors: list[str] = []
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            errors.append(f"{key}: unknown field")
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        errors.append(f"experiment: {name!r} is not one of {', '.join(EXPERIMENTS)}")
        raise ConfigError(errors)

    preset = raw.get("preset", "full")
    if preset not in PRESET_SAMPLES:
        errors.append(f"preset: {preset!r} is not one of smoke, full")
        preset = "full"

    domain = raw.get("domain", "path" if name == "edge-oracle" else "box")
    d = None
    N: tuple[int, ...] = ()
    k = None
    if domain not in ("box", "path"):
        errors.append(f"domain: {domain!r} is not one of box, path")
    if name == "edge-oracle":
        domain, k, d = "path", 2, 1
    elif "d" not in raw:
        errors.append("d: required")
    else:
        d = _int(raw, "d", errors, 1)
    if name != "edge-oracle" and domain == "path":
        if d is not None and d != 1:
            errors.append(f"d: a path domain lives in Z^1, got d={d}")
        if "k" not in raw:
            errors.append("k: required for a path domain")
        else:
            k = _int(raw, "k", errors, 1)
    elif name != "edge-oracle":
        if "N" not in raw:
            errors.append("N: required for a box domain")
        else:
            vals = raw["N"] if isinstance(raw["N"], list) else [raw["N"]]
            if not vals or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in vals):
                errors.append(f"N: expected a positive integer or a list of them, got {raw['N']!r}")
            else:
                N = tuple(sorted(set(vals)))
    if name == "highdim-scan":
        if domain != "box":
            errors.append("domain: highdim-scan runs on boxes")
        if N and min(N) < 2:
            errors.append("N: highdim-scan ladder needs N >= 2 (log N in the size scale)")
    elif name != "edge-oracle" and len(N) > 1:
        errors.append(f"N: a ladder is only meaningful for highdim-scan, got {list(N)}")
    if name == "twopoint-decay":
        if domain != "box":
            errors.append("domain: twopoint-decay runs on boxes")
        elif d is not None and d < 3:
            errors.append("d: twopoint-decay needs d >= 3")

    route = raw.get("route", DEFAULT_ROUTE[name])
    if route not in ROUTES:
        errors.append(f"route: {route!r} is not one of {', '.join(ROUTES)}")
    elif name in ("isomorphism-check", "coupling-equivalence") and route != "both":
        errors.append(f"route: {name} compares both routes, set route: both")
    elif name == "highdim-scan" and route != "gff":
        errors.append("route: highdim-scan is gff-only (loop route is capped to small domains)")

    samples = raw.get("samples", PRESET_SAMPLES[preset][name])
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        errors.append(f"samples: must be an integer >= 1, got {samples!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append(f"seed: must be an unsigned 64-bit integer, got {seed!r}")
    kappa = raw.get("kappa", 2.0)
    if isinstance(kappa, bool) or not isinstance(kappa, (int, float)) or not kappa > 0:
        errors.append(f"kappa: must be a positive number, got {kappa!r}")
    block_size = raw.get("block_size", 1 if name == "highdim-scan" else DEFAULT_BLOCK_SIZE)
    if isinstance(block_size, bool) or not isinstance(block_size, int) or block_size < 1:
        errors.append(f"block_size: must be an integer >= 1, got {block_size!r}")

    thresholds = dict(DEFAULT_THRESHOLDS)
    user_t = raw.get("thresholds", {}) or {}
    if not isinstance(user_t, dict):
        errors.append("thresholds: must be a mapping")
        user_t = {}
    for key, val in user_t.items():
        if key not in DEFAULT_THRESHOLDS:
            errors.append(f"thresholds.{key}: unknown threshold")
        elif isinstance(val, bool) or not isinstance(val, (int, float)):
            errors.append(f"thresholds.{key}: must be a number")
        else:
            thresholds[key] = float(val)

    pairs = raw.get("pairs")
    if pairs is not None:
        if not isinstance(pairs, list) or not all(isinstance(p, list) and len(p) == 2 for p in pairs):
            errors.append("pairs: expected a list of [point, point] entries")
    radii = raw.get("radii")
    if radii is not None and (not isinstance(radii, list) or not all(isinstance(r, int) and r >= 1 for r in radii)):
        errors.append("radii: expected a list of positive integers")
    plateau = raw.get("plateau")
    if plateau is not None and (not isinstance(plateau, list) or len(plateau) != 2):
        errors.append("plateau: expected [r_min, r_max]")

    for key in ("output", "per_sample_csv"):
        if raw.get(key) is not None and not isinstance(raw[key], str):
            errors.append(f"{key}: expected a path string")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=name, d=d, domain=domain, N=N, k=k, route=route, samples=samples,
        seed=seed, kappa=float(kappa), thresholds=thresholds, output=raw.get("output"),
        per_sample_csv=raw.get("per_sample_csv"), block_size=block_size, preset=preset,
        pairs=pairs, radii=sorted(radii) if radii else None, plateau=plateau,
    )
