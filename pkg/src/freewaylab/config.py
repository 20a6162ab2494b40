"""Run configuration: strict keyed INI parsing for the command line.

A run configuration has four sections.  [model] holds the bilayer
vector-field parameters, [numerics] the grid and tolerance knobs,
[task] command-specific parameters, and [run] the seed and output
directory.  Unknown sections or keys are rejected by name so that a
misspelled knob can never silently fall back to a default.
"""

import configparser
import hashlib
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import PcbParams

# every key the parser accepts, with its converter
_MODEL_KEYS = {
    "m": float, "c_w": float, "f0": float, "f1": float,
    "t0": float, "t1": float, "delta": float, "mu": float,
}
_NUMERICS_KEYS = {
    "l_z": float, "n_target": int, "tol": float, "gamma0": float,
    "k_max": float, "n_k": int, "stencil": int,
    "window_min": float, "window_max": float, "window_count": int,
}
_RUN_KEYS = {"seed": int, "output_dir": str}

# [task] keys are command-specific; converters are shared
_TASK_KEYS = {
    "s_min": float, "s_max": float, "n_samples": int,
    "root_index": int, "mu_max": float,
    "offset": float, "offsets": str,
    "d": int, "radius": float, "eps": str, "ell": float,
    "orbit": str, "artifacts": str,
}

_NUMERICS_DEFAULTS = {
    "l_z": None, "n_target": 1600, "tol": 1e-11, "gamma0": 1.0,
    "k_max": 10.0, "n_k": 200, "stencil": 9,
    "window_min": -10.0, "window_max": 10.0, "window_count": 10,
}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    task: dict = field(default_factory=dict)
    seed: int = 12345
    output_dir: str = "."
    source_text: str = ""

    def pcb_params(self):
        kwargs = {k: v for k, v in self.model.items() if k != "mu"}
        return PcbParams(**kwargs)

    @property
    def mu(self):
        return self.model.get("mu", 0.0)

    def digest(self):
        return hashlib.sha256(self.source_text.encode()).hexdigest()


def _convert(section, key, raw, converters):
    if key not in converters:
        raise ConfigError(f"unknown key '{key}' in section [{section}]")
    try:
        return converters[key](raw)
    except ValueError:
        raise ConfigError(
            f"key '{key}' in section [{section}]: cannot parse '{raw}'")


def _validate(cfg: RunConfig):
    for key in ("tol",):
        if cfg.numerics[key] <= 0.0:
            raise ConfigError(f"numerics key '{key}' must be positive")
    for key in ("n_target", "n_k"):
        if cfg.numerics[key] < 64:
            raise ConfigError(f"numerics key '{key}' must be >= 64")
    if cfg.numerics["stencil"] < 3 or cfg.numerics["stencil"] % 2 == 0:
        raise ConfigError("numerics key 'stencil' must be odd and >= 3")


def load_config(path):
    """Parse and validate a run configuration file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}")

    known = {"model": _MODEL_KEYS, "numerics": _NUMERICS_KEYS,
             "task": _TASK_KEYS, "run": _RUN_KEYS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    cfg = RunConfig(source_text=text)
    if parser.has_section("model"):
        for key, raw in parser.items("model"):
            cfg.model[key] = _convert("model", key, raw, _MODEL_KEYS)
    cfg.numerics = dict(_NUMERICS_DEFAULTS)
    if parser.has_section("numerics"):
        for key, raw in parser.items("numerics"):
            cfg.numerics[key] = _convert("numerics", key, raw,
                                         _NUMERICS_KEYS)
    if parser.has_section("task"):
        for key, raw in parser.items("task"):
            cfg.task[key] = _convert("task", key, raw, _TASK_KEYS)
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            val = _convert("run", key, raw, _RUN_KEYS)
            if key == "seed":
                cfg.seed = val
            else:
                cfg.output_dir = val
    _validate(cfg)
    return cfg


def parse_float_list(raw, what):
    """Parse a comma-separated list of floats from a task value."""
    try:
        vals = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse float list for '{what}': '{raw}'")
    if not vals:
        raise ConfigError(f"empty float list for '{what}'")
    return vals
