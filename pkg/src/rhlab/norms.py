"""Discrete L^p norms, the H^1_0 seminorm, and positive/negative parts."""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .potentials import ScalarField


def _values(u):
    return np.asarray(getattr(u, "values", u), dtype=float)


def _cell_volume(u, grid):
    if grid is not None:
        return grid.cell_volume
    return u.mask.grid.cell_volume


def lp_norm(u, p, grid=None) -> float:
    """``(sum |u_i|^p h^n)^(1/p)``, or ``max |u_i|`` for ``p = inf``.

    Values are scaled by their maximum first, so large ``p`` neither
    overflows nor underflows. For ``p < 1`` the same formula gives the
    quasi-norm.
    """
    p = float(p)
    if not p > 0:
        raise DomainError(f"L^p norm needs p > 0, got {p}")
    a = np.abs(_values(u))
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    s = float(np.sum((a / top) ** p))
    return top * (s * _cell_volume(u, grid)) ** (1.0 / p)


def h1_seminorm(u: ScalarField, grid=None) -> float:
    """``(sum over faces |difference quotient|^2 h^n)^(1/2)`` with zero exterior values."""
    mask = u.mask
    grid = grid or mask.grid
    full = mask.to_grid(_values(u))
    total = 0.0
    for axis, h in enumerate(grid.spacing):
        total += float(np.sum(np.diff(full, axis=axis) ** 2)) / h ** 2
    return math.sqrt(total * grid.cell_volume)


def signed_parts(u: ScalarField):
    """``f = max(u, 0)`` and ``g = -min(u, 0)``, so ``u = f - g`` and ``f g = 0``."""
    v = _values(u)
    # np.where rather than maximum keeps -0.0 out of g
    f = np.where(v > 0, v, 0.0)
    g = np.where(v < 0, -v, 0.0)
    return ScalarField(f, u.mask), ScalarField(g, u.mask)
