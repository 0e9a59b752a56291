"""Flat ``section.key = value`` configuration with range validation."""
from __future__ import annotations

import ast
import json
import math
from pathlib import Path


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "preset": "",
    "solver.eps": 0.02,
    "solver.dt": "auto",
    "solver.T": 1e-3,
    "solver.scheme": "semi-implicit",
    "solver.stabilization": 0.0,
    "noise.family": "white",
    "noise.sigma": 1.0,
    "noise.h": 0.125,
    "noise.cutoff": 128,
    "noise.seed": 0,
    "renorm.mode": "off",
    "initial.kind": "profile",
    "initial.value": 0.0,
    "initial.path": "",
    "interface.shape": "circle",
    "interface.center": (0.5, 0.5),
    "interface.radius": 0.25,
    "interface.strip_position": 0.5,
    "profile.lambda_formula": "paper",
    "output.dir": "sharpflow_out",
    "output.cadence": "auto",
    "experiment.replicas": "auto",
    "experiment.theta": 0.5,
    "experiment.gamma": 1.0,
    "check.force_fail": False,
    "experiment.grid": None,
}

# Parameter grid each preset sweeps; filled into experiment.grid when a preset is chosen.
PRESET_GRIDS: dict = {
    "ou-variance": {"eps": [0.01], "sigma": [1.0], "t": [0.1], "kmax": 8, "cutoff": 16, "replicas": 2000},
    "sup-bound": {"eps": [1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4], "sigma": [1.0], "cutoff": 128, "T": 0.1,
                  "replicas": 200},
    "renorm-scaling": {"eps": [0.05], "sigma": [1.0], "h": [2**-3, 2**-4, 2**-5, 2**-6], "cutoff": 64, "t": 0.1,
                       "replicas": 10_000},
    "wick-centering": {"eps": [0.05], "sigma": [1.0], "h": [0.125], "cutoff": 64, "t": 0.1, "replicas": 10_000},
    "profile-identity": {"eps": [0.02], "cutoff": 256},
    "conservation": {"eps": [0.05], "cutoff": 32, "steps": 10_000, "energy_cutoff": 128},
    "deterministic-interface": {"eps": [0.04, 0.02, 0.01], "radius": 0.25, "cutoff": 256, "T": 1e-3},
    "stochastic-residual": {"eps": [0.02], "sigma": [1.0, 2.0, 3.0], "cutoff": 128, "T": 1e-3, "replicas": 20},
    "spectral-estimate": {"eps": [0.08, 0.04, 0.02], "radius": 0.15, "cutoff": 256},
    "stopping-time": {"eps": [0.02], "sigma": [3.0], "gamma": 1.0, "cutoff": 128, "T": 1e-3, "replicas": 20},
}

CHOICES = {
    "solver.scheme": ("semi-implicit", "stabilized"),
    "noise.family": ("white", "divergence", "none"),
    "renorm.mode": ("off", "pointwise", "average"),
    "initial.kind": ("profile", "constant", "file"),
    "interface.shape": ("circle", "strip"),
    "profile.lambda_formula": ("paper", "classical", "matched"),
}


def _coerce(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip("\"'")


def read_config_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments) or a JSON object."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        return _flatten(data)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = _coerce(val)
    return out


def _flatten(data: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in data.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _num(cfg, key, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False, rng=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    v = float(v)
    bad_lo = v <= lo if lo_open else v < lo
    bad_hi = v >= hi if hi_open else v > hi
    if bad_lo or bad_hi or math.isnan(v):
        raise ConfigError(f"{key} = {v!r} is outside the accepted range {rng}")
    cfg[key] = v


def validate(cfg: dict) -> dict:
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if cfg.get("experiment.grid") is not None:
        raise ConfigError("experiment.grid is derived from preset and cannot be set")
    if unknown:
        raise ConfigError(f"unknown configuration key {unknown[0]!r}; accepted keys: {', '.join(sorted(DEFAULTS))}")
    _num(cfg, "solver.eps", 0.0, 0.5, lo_open=True, rng="(0, 0.5]")
    if cfg["solver.dt"] != "auto":
        _num(cfg, "solver.dt", 0.0, lo_open=True, rng="(0, inf) or 'auto'")
    _num(cfg, "solver.T", 0.0, rng="[0, inf)")
    _num(cfg, "solver.stabilization", 0.0, rng="[0, inf)")
    _num(cfg, "noise.sigma", 0.0, rng="[0, inf]")
    _num(cfg, "noise.h", 0.0, 1.0, lo_open=True, rng="(0, 1]")
    n = cfg["noise.cutoff"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1 or n > 1024 or n & (n - 1):
        raise ConfigError(f"noise.cutoff = {n!r} must be a power of two <= 1024")
    seed = cfg["noise.seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"noise.seed = {seed!r} must be an unsigned 64-bit integer")
    for key, choices in CHOICES.items():
        if cfg[key] not in choices:
            raise ConfigError(f"{key} = {cfg[key]!r} must be one of {'|'.join(choices)}")
    c = cfg["interface.center"]
    if not (isinstance(c, (tuple, list)) and len(c) == 2 and all(0 < float(x) < 1 for x in c)):
        raise ConfigError(f"interface.center = {c!r} must be a pair inside (0, 1)^2")
    cfg["interface.center"] = (float(c[0]), float(c[1]))
    _num(cfg, "interface.radius", 0.0, 0.5, lo_open=True, rng="(0, 0.5)")
    _num(cfg, "interface.strip_position", 0.0, 1.0, lo_open=True, hi_open=True, rng="(0, 1)")
    _num(cfg, "experiment.theta", 0.0, lo_open=True, rng="(0, inf)")
    _num(cfg, "experiment.gamma", 0.0, lo_open=True, rng="(0, inf]")
    r = cfg["experiment.replicas"]
    if r != "auto" and (isinstance(r, bool) or not isinstance(r, int) or r < 1):
        raise ConfigError(f"experiment.replicas = {r!r} must be a positive integer or 'auto'")
    cad = cfg["output.cadence"]
    if cad != "auto" and (isinstance(cad, bool) or not isinstance(cad, int) or cad < 1):
        raise ConfigError(f"output.cadence = {cad!r} must be a positive integer or 'auto'")
    if not isinstance(cfg["check.force_fail"], bool):
        raise ConfigError("check.force_fail must be true or false")
    if cfg["renorm.mode"] != "off" and cfg["noise.family"] != "divergence":
        raise ConfigError("renorm.mode requires noise.family = divergence")
    return cfg


def parse_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file at ``path``, then ``overrides``; validated."""
    cfg = dict(DEFAULTS)
    if path is not None:
        cfg.update(read_config_file(path))
    if overrides:
        cfg.update(overrides)
    cfg = validate(cfg)
    if cfg["preset"]:
        if cfg["preset"] not in PRESET_GRIDS:
            raise ConfigError(f"preset = {cfg['preset']!r} must be one of {'|'.join(PRESET_GRIDS)}")
        cfg["experiment.grid"] = dict(PRESET_GRIDS[cfg["preset"]])
    return cfg


def echo(cfg: dict) -> str:
    return "\n".join(f"{k} = {cfg[k]!r}" for k in sorted(cfg))
