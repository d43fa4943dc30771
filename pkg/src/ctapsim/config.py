"""Strict JSON experiment configs: parsing, defaults and round-trip serialisation.

A config is one flat JSON object.  ``kind`` selects the experiment; each kind
accepts a fixed key set and anything else is rejected, so typos fail loudly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .chain import SpinMode
from .dynamics import IntegratorConfig
from .errors import ConfigError
from .experiments import DEFAULT_OMEGA_MAX, DisorderConfig, SweepConfig

KINDS = ("run", "sweep", "disorder", "compare", "spectra")

_COMMON = {"kind", "scheme", "n_sites", "omega_max", "straddle_ratio", "envelope", "spin_mode",
           "alpha", "beta", "integrator", "adiabaticity_samples", "seed", "output_dir", "plot"}
_POINT = {"gamma", "t_max_ns"}
KEYS = {
    "run": _COMMON | _POINT | {"trajectory_adiabaticity"},
    "sweep": _COMMON | {"gamma_grid", "t_max_grid"},
    "disorder": _COMMON | _POINT | {"sigma", "trials"},
    "compare": _COMMON | _POINT,
    "spectra": _COMMON | {"t_max_ns"},
}
INTEGRATOR_KEYS = {"method", "step", "record_every", "oracle_samples"}
RANGE_KEYS = {"start", "stop", "num", "scale"}
DEFAULT_T_MAX = 80.0
DEFAULT_TRIALS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: the transport setup plus what to do with it."""

    kind: str
    sweep: SweepConfig
    sigma: float | None = None
    trials: int | None = None
    output_dir: str = "."
    plot: bool = False
    trajectory_adiabaticity: bool = False

    @property
    def n_points(self) -> int:
        return self.sweep.n_points

    @property
    def t_max(self) -> float:
        return self.sweep.t_max_grid[0]

    @property
    def gamma(self) -> float:
        return self.sweep.gamma_grid[0]

    def disorder(self) -> DisorderConfig:
        if self.kind != "disorder":
            raise ConfigError(f"kind: {self.kind!r} is not a disorder experiment")
        return DisorderConfig(sigma=self.sigma, trials=self.trials, seed=self.sweep.seed,
                              base=self.sweep)

    def with_overrides(self, seed=None, output_dir=None, plot=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, sweep=replace(cfg.sweep, seed=int(seed)))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        if plot:
            cfg = replace(cfg, plot=True)
        return cfg


# ---------------------------------------------------------------- field readers

def _number(raw, path, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {json.dumps(raw)}")
    if integer:
        if isinstance(raw, float) and not raw.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {raw}")
        return int(raw)
    value = float(raw)
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    return value


def _bool(raw, path):
    if not isinstance(raw, bool):
        raise ConfigError(f"{path}: expected true or false, got {json.dumps(raw)}")
    return raw


def _string(raw, path):
    if not isinstance(raw, str):
        raise ConfigError(f"{path}: expected a string, got {json.dumps(raw)}")
    return raw


def _complex(raw, path):
    """A number, or a [re, im] pair."""
    if isinstance(raw, list):
        if len(raw) != 2:
            raise ConfigError(f"{path}: complex values are written [re, im]")
        return complex(_number(raw[0], f"{path}[0]"), _number(raw[1], f"{path}[1]"))
    return complex(_number(raw, path))


def _grid(raw, path):
    """Explicit list, or {"start", "stop", "num", "scale": "linear"|"log"}."""
    if isinstance(raw, list):
        return tuple(_number(v, f"{path}[{k}]") for k, v in enumerate(raw))
    if isinstance(raw, dict):
        _reject_unknown(raw, RANGE_KEYS, path)
        for key in ("start", "stop", "num"):
            if key not in raw:
                raise ConfigError(f"{path}.{key}: required")
        start = _number(raw["start"], f"{path}.start")
        stop = _number(raw["stop"], f"{path}.stop")
        num = _number(raw["num"], f"{path}.num", integer=True)
        if num < 1:
            raise ConfigError(f"{path}.num: must be >= 1")
        scale = _string(raw.get("scale", "linear"), f"{path}.scale")
        if scale == "linear":
            values = np.linspace(start, stop, num)
        elif scale == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"{path}: log-spaced grids need positive start and stop")
            values = np.geomspace(start, stop, num)
        else:
            raise ConfigError(f"{path}.scale: must be 'linear' or 'log', got {scale!r}")
        return tuple(float(v) for v in values)
    raise ConfigError(f"{path}: expected a list or a range object")


def _reject_unknown(obj, allowed, path=""):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown key")


def _integrator(raw, path="integrator"):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(raw, INTEGRATOR_KEYS, path)
    kw = {}
    if "method" in raw:
        kw["method"] = _string(raw["method"], f"{path}.method")
    if raw.get("step") is not None:
        kw["step"] = _number(raw["step"], f"{path}.step")
    if raw.get("record_every") is not None:
        kw["record_every"] = _number(raw["record_every"], f"{path}.record_every", integer=True)
    if "oracle_samples" in raw:
        kw["oracle_samples"] = _number(raw["oracle_samples"], f"{path}.oracle_samples", integer=True)
    try:
        return IntegratorConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- parse / serialise

def config_from_dict(obj) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object at top level")
    if "kind" not in obj:
        raise ConfigError(f"kind: required, one of {KINDS}")
    kind = _string(obj["kind"], "kind")
    if kind not in KINDS:
        raise ConfigError(f"kind: must be one of {KINDS}, got {kind!r}")
    _reject_unknown(obj, KEYS[kind])

    scheme = _string(obj.get("scheme", "ctap3"), "scheme")
    n_default = 5 if scheme == "ctapn" else 3
    kw = dict(
        scheme=scheme,
        n_sites=_number(obj.get("n_sites", n_default), "n_sites", integer=True),
        omega_max=_number(obj.get("omega_max", DEFAULT_OMEGA_MAX), "omega_max"),
        straddle_ratio=_number(obj.get("straddle_ratio", 3.0), "straddle_ratio"),
        envelope=_string(obj.get("envelope", "gaussian"), "envelope"),
        spin_mode=_string(obj.get("spin_mode", SpinMode.CHARGE_ONLY.value), "spin_mode"),
        alpha=_complex(obj.get("alpha", 1.0), "alpha"),
        beta=_complex(obj.get("beta", 0.0), "beta"),
        integrator=_integrator(obj.get("integrator", {})),
        adiabaticity_samples=_number(obj.get("adiabaticity_samples", 2001),
                                     "adiabaticity_samples", integer=True),
        seed=_number(obj.get("seed", 0), "seed", integer=True),
    )
    if not 0 <= kw["seed"] < 2**64:
        raise ConfigError("seed: must be a 64-bit unsigned integer")
    if kind == "sweep":
        for key in ("gamma_grid", "t_max_grid"):
            if key not in obj:
                raise ConfigError(f"{key}: required for a sweep")
        kw["gamma_grid"] = _grid(obj["gamma_grid"], "gamma_grid")
        kw["t_max_grid"] = _grid(obj["t_max_grid"], "t_max_grid")
    else:
        kw["gamma_grid"] = (_number(obj.get("gamma", 0.0), "gamma"),)
        kw["t_max_grid"] = (_number(obj.get("t_max_ns", DEFAULT_T_MAX), "t_max_ns"),)
    sweep = SweepConfig(**kw)

    extra = {}
    if kind == "disorder":
        if "sigma" not in obj:
            raise ConfigError("sigma: required for a disorder experiment")
        extra["sigma"] = _number(obj["sigma"], "sigma")
        extra["trials"] = _number(obj.get("trials", DEFAULT_TRIALS), "trials", integer=True)
    if kind == "compare" and sweep.scheme != "ctap3":
        raise ConfigError("scheme: compare always runs ctap3 against intuitive3; use 'ctap3'")
    if kind == "run":
        extra["trajectory_adiabaticity"] = _bool(obj.get("trajectory_adiabaticity", False),
                                                 "trajectory_adiabaticity")
    cfg = ExperimentConfig(
        kind=kind, sweep=sweep,
        output_dir=_string(obj.get("output_dir", "."), "output_dir"),
        plot=_bool(obj.get("plot", False), "plot"),
        **extra,
    )
    if kind == "disorder":
        cfg.disorder()  # validates sigma and trials
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Every field written out explicitly, so the dict alone reproduces the run."""
    sw = cfg.sweep
    integ = sw.integrator
    out = {
        "kind": cfg.kind,
        "scheme": sw.scheme,
        "n_sites": sw.n_sites,
        "omega_max": sw.omega_max,
        "straddle_ratio": sw.straddle_ratio,
        "envelope": sw.envelope,
        "spin_mode": sw.spin_mode.value,
        "alpha": [sw.alpha.real, sw.alpha.imag],
        "beta": [sw.beta.real, sw.beta.imag],
        "integrator": {"method": integ.method, "step": integ.step,
                       "record_every": integ.record_every, "oracle_samples": integ.oracle_samples},
        "adiabaticity_samples": sw.adiabaticity_samples,
        "seed": sw.seed,
        "output_dir": cfg.output_dir,
        "plot": cfg.plot,
    }
    if cfg.kind == "sweep":
        out["gamma_grid"] = list(sw.gamma_grid)
        out["t_max_grid"] = list(sw.t_max_grid)
    elif cfg.kind == "spectra":
        out["t_max_ns"] = cfg.t_max
    else:
        out["gamma"] = cfg.gamma
        out["t_max_ns"] = cfg.t_max
    if cfg.kind == "disorder":
        out["sigma"] = cfg.sigma
        out["trials"] = cfg.trials
    if cfg.kind == "run":
        out["trajectory_adiabaticity"] = cfg.trajectory_adiabaticity
    return out


def serialize(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True)


def parse_text(text: str) -> ExperimentConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON ({exc.msg} at line {exc.lineno} "
                          f"column {exc.colno})") from None
    return config_from_dict(obj)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config: no such file {str(path)!r}") from None
    except OSError as exc:
        raise ConfigError(f"config: cannot read {str(path)!r} ({exc.strerror})") from None
    return parse_text(text)
