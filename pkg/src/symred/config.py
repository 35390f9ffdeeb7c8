"""Experiment configuration: JSON files with strict keys over per-model defaults."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

METHODS = ("pod", "cotangent", "complex_svd", "nlp", "deim", "sdeim")
PSD_METHODS = ("cotangent", "complex_svd", "nlp", "sdeim")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


_COMMON = {
    "integration": {
        "scheme": "implicit_midpoint",
        "newton_tol": 1e-12,
        "newton_max_iters": 50,
        "newton_jacobian": "exact",
        "newton_guess": "previous",
    },
    "diagnostics": {
        "blowup_factor": 1e6,
        "timing_steps": 100,
        "timing_repeats": 5,
    },
    "outputs": {"directory": "out", "emit_svg": False},
    "seed": 0,
}

PRESETS = {
    "linear_wave": {
        "model": "linear_wave",
        "grid": {"n": 500, "l": 1.0},
        "physics": {"c": 0.1},
        "initial": {"kind": "spline"},
        "boundary": {"kind": "periodic"},
        "integration": {"dt": 0.01, "T": 50.0},
        "snapshots": {"stride": 50, "gamma": 0.01},
        "reduction": {"methods": ["pod", "cotangent", "complex_svd"],
                      "k": [10, 20, 30, 40, 50, 60, 70, 80], "r": 100, "m": None},
        "diagnostics": {"compare": "q", "reference": "full"},
    },
    "sine_gordon": {
        "model": "sine_gordon",
        "grid": {"n": 2000, "l": 50.0},
        "physics": {"c": 1.0, "v": 0.2, "x0": 10.0},
        "initial": {"kind": "kink"},
        "boundary": {"kind": "dirichlet", "left": 0.0, "right": 2 * math.pi},
        "integration": {"dt": 0.0125, "T": 150.0},
        "snapshots": {"stride": 10, "gamma": 1.0},
        "reduction": {"methods": ["pod", "cotangent", "deim", "sdeim"],
                      "k": [40, 60, 80, 100, 120, 140, 160, 180, 200], "r": 100, "m": None},
        "diagnostics": {"compare": "state", "reference": "analytic"},
    },
    "custom": {
        "model": "custom",
        "grid": {"n": 200, "l": 1.0},
        "physics": {"c": 1.0, "v": 0.2, "x0": 0.5, "nonlinearity": "none"},
        "initial": {"kind": "spline"},
        "boundary": {"kind": "periodic"},
        "integration": {"dt": 0.01, "T": 1.0},
        "snapshots": {"stride": 10, "gamma": 1.0},
        "reduction": {"methods": ["pod", "cotangent"], "k": [10], "r": 20, "m": None},
        "diagnostics": {"compare": "q", "reference": "full"},
    },
}

# every key that may appear in a config file; ``None`` marks a leaf
_SCHEMA = {
    "model": None,
    "grid": {"n": None, "l": None},
    "physics": {"c": None, "v": None, "x0": None, "nonlinearity": None},
    "initial": {"kind": None},
    "boundary": {"kind": None, "left": None, "right": None},
    "integration": {"scheme": None, "dt": None, "T": None, "newton_tol": None,
                    "newton_max_iters": None, "newton_jacobian": None, "newton_guess": None},
    "snapshots": {"stride": None, "gamma": None},
    "reduction": {"methods": None, "k": None, "r": None, "m": None},
    "diagnostics": {"compare": None, "reference": None, "blowup_factor": None,
                    "timing_steps": None, "timing_repeats": None},
    "outputs": {"directory": None, "emit_svg": None},
    "seed": None,
}


def _merge(base, override, schema, path=""):
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in schema:
            raise ConfigError(f"unknown configuration key {where!r}")
        sub = schema[key]
        if sub is None:
            base[key] = value
        else:
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a section (object)")
            base.setdefault(key, {})
            _merge(base[key], value, sub, where + ".")
    return base


def _deep_defaults(model):
    cfg = copy.deepcopy(_COMMON)
    for key, value in copy.deepcopy(PRESETS[model]).items():
        if isinstance(value, dict):
            cfg.setdefault(key, {}).update(value)
        else:
            cfg[key] = value
    return cfg


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment settings (see :func:`load_config`)."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def model(self) -> str:
        return self.data["model"]

    @property
    def methods(self) -> list:
        return list(self.data["reduction"]["methods"])

    @property
    def k_values(self) -> list:
        return [int(k) for k in self.data["reduction"]["k"]]

    @property
    def n_steps(self) -> int:
        it = self.data["integration"]
        return int(round(it["T"] / it["dt"]))

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _validate(cfg: dict) -> None:
    g, it, sn, red, diag = (cfg["grid"], cfg["integration"], cfg["snapshots"],
                            cfg["reduction"], cfg["diagnostics"])
    _require(isinstance(g["n"], int) and g["n"] >= 3, "grid.n must be an integer >= 3")
    _require(g["l"] > 0, "grid.l must be positive")
    _require(cfg["physics"]["c"] > 0, "physics.c must be positive")
    _require(it["dt"] > 0, "integration.dt must be positive")
    _require(it["T"] >= 0, "integration.T must be nonnegative")
    m = it["T"] / it["dt"]
    _require(abs(m - round(m)) <= 1e-8 * max(1.0, m), "integration.T must be a multiple of dt")
    _require(isinstance(sn["stride"], int) and sn["stride"] >= 1,
             "snapshots.stride must be a positive integer")
    _require(int(round(m)) % sn["stride"] == 0,
             "the snapshot interval stride*dt must divide T")
    _require(sn["gamma"] > 0, "snapshots.gamma must be positive")
    methods = red["methods"]
    _require(isinstance(methods, list), "reduction.methods must be a list")
    for meth in methods:
        _require(meth in METHODS, f"unknown reduction method {meth!r}")
    _require(len(set(methods)) == len(methods), "reduction.methods has duplicates")
    ks = red["k"]
    _require(isinstance(ks, list) and all(isinstance(k, int) and k >= 1 for k in ks),
             "reduction.k must be a list of positive integers")
    if any(mth in PSD_METHODS for mth in methods):
        _require(all(k % 2 == 0 for k in ks),
                 "symplectic methods need even k (basis width k = 2 x half-width)")
    _require(isinstance(red["r"], int) and red["r"] >= 1, "reduction.r must be a positive integer")
    _require(red["m"] is None or (isinstance(red["m"], int) and red["m"] >= 1),
             "reduction.m must be null or a positive integer")
    _require(diag["compare"] in ("q", "state"), "diagnostics.compare must be 'q' or 'state'")
    _require(diag["reference"] in ("full", "analytic"),
             "diagnostics.reference must be 'full' or 'analytic'")
    if diag["reference"] == "analytic":
        _require(cfg["model"] == "sine_gordon",
                 "the analytic reference exists only for the sine_gordon model")
    _require(diag["blowup_factor"] > 1, "diagnostics.blowup_factor must exceed 1")
    _require(isinstance(diag["timing_steps"], int) and diag["timing_steps"] >= 0,
             "diagnostics.timing_steps must be a nonnegative integer")
    _require(isinstance(diag["timing_repeats"], int) and diag["timing_repeats"] >= 1,
             "diagnostics.timing_repeats must be a positive integer")
    _require(cfg["initial"]["kind"] in ("spline", "kink"), "initial.kind must be 'spline' or 'kink'")
    _require(cfg["boundary"]["kind"] in ("periodic", "dirichlet", "neumann"),
             "boundary.kind must be periodic, dirichlet or neumann")
    nl = cfg["physics"].get("nonlinearity", "none")
    _require(nl in ("none", "sine"), "physics.nonlinearity must be 'none' or 'sine'")
    if cfg["initial"]["kind"] == "kink":
        v = cfg["physics"].get("v")
        _require(v is not None and abs(v) < 1, "kink initial data needs |physics.v| < 1")
        _require(cfg["physics"].get("x0") is not None, "kink initial data needs physics.x0")
    if cfg["model"] == "linear_wave":
        _require(cfg["initial"]["kind"] == "spline" and cfg["boundary"]["kind"] == "periodic",
                 "linear_wave uses the periodic spline setup; use model 'custom' otherwise")
    _require(isinstance(cfg["outputs"]["emit_svg"], bool), "outputs.emit_svg must be a boolean")
    _require(isinstance(cfg["seed"], int), "seed must be an integer")


def build_config(overrides: dict | None = None) -> ExperimentConfig:
    """Resolve ``overrides`` (a parsed config file) against its model preset."""
    overrides = dict(overrides or {})
    model = overrides.get("model", "linear_wave")
    if model not in PRESETS:
        raise ConfigError(f"unknown model {model!r}; expected one of {sorted(PRESETS)}")
    cfg = _merge(_deep_defaults(model), overrides, _SCHEMA)
    try:
        _validate(cfg)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    return ExperimentConfig(cfg)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return build_config(data)
