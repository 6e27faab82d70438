"""Spectral law of MANOVA variance-component estimators."""

import json as _json

from . import _core
from ._core import VarspecError, crossed_b, mp_density, mp_stieltjes, nested_b, oneway_b

__all__ = [
    "VarspecError",
    "check",
    "compare",
    "crossed_b",
    "density",
    "mp_density",
    "mp_stieltjes",
    "nested_b",
    "oneway_b",
    "simulate",
    "solve_at_z",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def solve_at_z(config, z, general=False):
    """Fixed point (a, b, m0) at one spectral parameter."""
    return _core.solve_at_z(_text(config), complex(z), general)


def density(config, grid=None, eps=1e-4, general=False):
    """(grid, f, converged); an automatic grid when none is given."""
    return _core.density(_text(config), list(grid) if grid is not None else [], eps, general)


def simulate(config, seed=0, reps=1, target=0):
    """Sorted estimator eigenvalues, one list per replicate."""
    return _core.simulate(_text(config), seed, reps, target)


def compare(eigenvalues, grid, values, eps=1e-4, trim=0):
    return _core.compare(list(eigenvalues), list(grid), list(values), eps, trim)


def check(config, z_samples=20):
    """(all passed, list of checks) from the invariant suite."""
    return _core.check(_text(config), z_samples)
