"""Lower and upper bounds for Bermudan options from neural regressions."""

import json
import os

from . import _dualstop
from ._dualstop import (
    ConfigError,
    DivergenceError,
    FormatError,
    ResourceError,
    binomial_bermudan_put,
    black_scholes_call,
    black_scholes_put,
    heston_european_put,
    render_report,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "ResourceError",
    "binomial_bermudan_put",
    "black_scholes_call",
    "black_scholes_put",
    "describe_plan",
    "evaluate_policy",
    "heston_european_put",
    "render_report",
    "resolve_config",
    "run",
    "simulate",
]


def _text(config):
    """Accept a mapping, a path to a JSON file, or JSON text."""
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, os.PathLike) or (isinstance(config, str) and os.path.isfile(config)):
        with open(config, encoding="utf-8") as handle:
            return handle.read()
    return config


def resolve_config(config):
    """Validated configuration with every default filled in."""
    return json.loads(_dualstop.resolve_config(_text(config)))


def describe_plan(config):
    return _dualstop.describe_plan(_text(config))


def simulate(config, paths, seed):
    """Return (states, increments) arrays for the configured model and grid."""
    return _dualstop.simulate(_text(config), paths, seed)


def run(config, seed=None, out=None):
    """Train, evaluate and write artifacts; returns the pooled bounds."""
    return _dualstop.run(_text(config), seed, None if out is None else os.fspath(out))


def evaluate_policy(policy_dir, config, paths, seed):
    return _dualstop.evaluate_policy(os.fspath(policy_dir), _text(config), paths, seed)
