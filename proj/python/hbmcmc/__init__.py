"""Hessian-based MCMC for 1D Bayesian inverse problems.

Configs are plain dicts with the same nested layout as the CLI's JSON files.
Missing keys keep their defaults.
"""

import json

from . import _core
from ._core import ConfigError, NumericalError, autocorrelation, ess, iat, mpsrf

__all__ = [
    "ConfigError",
    "NumericalError",
    "autocorrelation",
    "config",
    "diagnose",
    "ess",
    "iat",
    "map_point",
    "mpsrf",
    "pipeline",
    "sample",
    "synth",
]


def _text(cfg):
    return json.dumps(cfg or {})


def config(cfg=None, **overrides):
    """Full config dict. Overrides use dotted keys with '_' for '.', e.g. prior_a=1.0."""
    flat = {}
    keys = set(_core.config_keys())
    for name, value in overrides.items():
        key = name.replace("_", ".", 1)
        if key not in keys:
            raise ConfigError(f"unknown config key '{key}'")
        flat[key] = ",".join(value) if isinstance(value, (list, tuple)) else str(value)
    return json.loads(_core.normalize_config(_text(cfg), flat))


def synth(cfg):
    return _core.synth(_text(cfg))


def map_point(cfg):
    return _core.map(_text(cfg))


def sample(cfg, method="snmap"):
    return _core.sample(_text(cfg), method)


def diagnose(cfg, chains_dir):
    return _core.diagnose(_text(cfg), str(chains_dir))


def pipeline(cfg):
    return _core.pipeline(_text(cfg))
