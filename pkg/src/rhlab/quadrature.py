"""Integrals over grid cells of functions with a point singularity.

A box containing the singular point ``c`` is cut at ``c`` into sub-boxes that
have ``c`` as a vertex. Each sub-box is the union of pyramids with apex ``c``
over its far faces, and on the pyramid over a face at distance ``a``

    int F dx = a * int_face int_0^1 t^(n-1) F(c + t (y - c)) dt dA(y).

With ``F ~ |x - c|^(-s)`` the radial factor ``t^(n-1-s)`` is taken as the
Gauss-Jacobi weight, so power laws are integrated exactly in ``t`` and the
face integrals (bounded away from ``c``) use tensor Gauss-Legendre.
"""
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=64)
def _jacobi_01(order, beta):
    # int_0^1 t^beta g(t) dt
    x, w = roots_jacobi(order, 0.0, beta)
    return 0.5 * (x + 1.0), w * 0.5 ** (beta + 1.0)


@lru_cache(maxsize=16)
def _legendre_01(order):
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _face_rule(widths, order, panels):
    """Tensor Gauss-Legendre points on ``prod [0, widths[k]]`` split into panels."""
    x, w = _legendre_01(order)
    axes, weights = [], []
    for width in widths:
        edges = np.linspace(0.0, width, panels + 1)
        pts = (edges[:-1, None] + np.diff(edges)[:, None] * x).ravel()
        wts = (np.diff(edges)[:, None] * w).ravel()
        axes.append(pts)
        weights.append(wts)
    if not axes:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*axes, indexing="ij")
    wgrid = np.meshgrid(*weights, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
    return pts, wts


def _vertex_box_integral(func, center, signs, widths, s, order, panels, radial_order):
    """Integral over the box ``center + signs * [0, widths]``."""
    n = center.shape[0]
    beta = n - 1.0 - s
    t, wt = _jacobi_01(radial_order, beta)
    total = 0.0
    for axis in range(n):
        others = [k for k in range(n) if k != axis]
        pts2, w2 = _face_rule([widths[k] for k in others], order, panels)
        y = np.empty((pts2.shape[0], n))
        y[:, axis] = widths[axis]
        y[:, others] = pts2
        y *= signs
        # points c + t*y for every (t, face point)
        pts = center + t[:, None, None] * y[None, :, :]
        vals = func(pts.reshape(-1, n)).reshape(t.shape[0], -1)
        vals = vals * t[:, None] ** s
        total += widths[axis] * float(np.einsum("i,j,ij->", wt, w2, vals))
    return total


def singular_box_integral(func, lo, hi, center, s, order=12, panels=2, radial_order=10):
    """``int_box func`` for ``func`` behaving like ``|x - center|^(-s)`` near ``center``.

    ``center`` must lie in the closed box and ``s < n``. ``func`` maps points
    of shape ``(m, n)`` to values of shape ``(m,)``.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    center = np.asarray(center, float)
    n = lo.shape[0]
    if s >= n:
        raise ValueError(f"singularity |x|^-{s} is not integrable in {n} dimensions")
    total = 0.0
    for signs in product((-1.0, 1.0), repeat=n):
        signs = np.asarray(signs)
        widths = np.where(signs > 0, hi - center, center - lo)
        if np.any(widths <= 0.0):
            continue
        total += _vertex_box_integral(
            func, center, signs, widths, s, order, panels, radial_order
        )
    return total


def sphere_area(n):
    """Surface area of the unit sphere in R^n."""
    from math import gamma, pi

    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)
