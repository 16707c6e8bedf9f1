"""Bayesian functional mixed membership models."""

import json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    FunmixError,
    NumericalError,
    elbow_scan,
    parameter_count,
    simultaneous_band,
    summarize,
)

__all__ = [
    "ConfigError",
    "DataError",
    "FunmixError",
    "NumericalError",
    "elbow_scan",
    "fit",
    "parameter_count",
    "simulate",
    "simultaneous_band",
    "summarize",
]


def simulate(spec=None, **overrides):
    """Draw a synthetic dataset. Returns (curves, truth) where curves is a
    list of (t, y) arrays and truth holds the spec and true state."""
    spec = dict(spec or {"study": "study1"}, **overrides)
    curves, truth = _core.simulate(json.dumps(spec))
    return curves, json.loads(truth)


def fit(curves, config=None, chain=0, archive=None):
    """Run one chain. config mirrors the TOML run file as nested dicts."""
    out = _core.fit(curves, json.dumps(config or {}), chain, None if archive is None else str(archive))
    out["draws"] = [json.loads(d) for d in out["draws"]]
    return out
