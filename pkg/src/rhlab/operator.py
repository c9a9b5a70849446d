"""Discrete L u = -d_j(a_ij d_i u) + V u on a masked grid.

The operator is the matrix of the discrete bilinear form

    B(u, phi) = sum_faces a_dd (D_d u)(D_d phi) h^n
              + sum_plaquettes [a_ij (D_i u)(D_j phi) + a_ji (D_j u)(D_i phi)] h^n
              + sum_nodes V u phi h^n

divided by the nodal mass h^n. Diagonal coefficients are sampled at face
midpoints; mixed coefficients at plaquette centres, where D_i averages the
two i-differences around the plaquette (a four-point cross stencil). The
form is symmetric whenever a is, and antisymmetric parts of a drop out of
the quadratic form exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import AssemblyError, DegenerateInputError, EllipticityError
from .mesh import DomainMask, Grid

SYMMETRY_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Matrix field ``a(x)``; ``func`` maps points ``(m, n)`` to ``(m, n, n)``."""

    func: Callable[[np.ndarray], np.ndarray]
    dimension: int
    symmetric: Optional[bool] = None
    description: dict = field(default_factory=dict)

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        a = np.asarray(self.func(points), dtype=float)
        n = self.dimension
        if a.shape == (n, n):
            a = np.broadcast_to(a, (points.shape[0], n, n))
        if a.shape != (points.shape[0], n, n):
            raise AssemblyError(f"coefficient returned shape {a.shape}")
        return a

    @classmethod
    def identity(cls, n):
        return cls.constant(np.eye(n))

    @classmethod
    def constant(cls, matrix):
        matrix = np.array(matrix, dtype=float)
        n = matrix.shape[0]
        matrix.setflags(write=False)
        return cls(lambda x: matrix, n, None, {"kind": "constant", "matrix": matrix.tolist()})

    @classmethod
    def shear(cls, n, amplitude, axis=0, pair=(0, 1), skew=0.0):
        """``I + amplitude*sin(pi x_axis)(e_i e_j^T + e_j e_i^T) + skew*sin(pi x_axis)(e_i e_j^T - e_j e_i^T)``."""
        i, j = pair

        def func(x):
            s = np.sin(np.pi * x[:, axis])
            a = np.broadcast_to(np.eye(n), (x.shape[0], n, n)).copy()
            a[:, i, j] += (amplitude + skew) * s
            a[:, j, i] += (amplitude - skew) * s
            return a

        desc = {"kind": "shear", "amplitude": amplitude, "axis": axis,
                "pair": [i, j], "skew": skew}
        return cls(func, n, skew == 0.0, desc)

    def to_dict(self):
        return dict(self.description)


def coefficient_from_dict(data: dict, n: int) -> CoefficientField:
    from .errors import ConfigurationError

    kind = data.get("kind", "identity")
    if kind == "identity":
        return CoefficientField.identity(n)
    if kind == "constant":
        matrix = np.asarray(data["matrix"], dtype=float)
        if matrix.shape != (n, n):
            raise ConfigurationError(f"coefficient matrix must be {n}x{n}")
        return CoefficientField.constant(matrix)
    if kind == "shear":
        return CoefficientField.shear(
            n, float(data.get("amplitude", 0.5)), int(data.get("axis", 0)),
            tuple(int(k) for k in data.get("pair", (0, 1))), float(data.get("skew", 0.0)),
        )
    raise ConfigurationError(f"unknown coefficient kind {kind!r}")


@dataclass(eq=False)
class SparseOperator:
    matrix: sp.csr_matrix
    mask: DomainMask
    symmetric: bool
    ellipticity: Optional[float] = None

    @property
    def grid(self) -> Grid:
        return self.mask.grid

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def _csr(self):
        m = self.matrix
        return (np.ascontiguousarray(m.indptr), np.ascontiguousarray(m.indices),
                np.ascontiguousarray(m.data, dtype=np.float64))

    def matvec(self, x):
        indptr, indices, data = self._csr
        return kernels.csr_matvec(indptr, indices, data, np.ascontiguousarray(x, dtype=float))

    def quadratic_form(self, v):
        return kernels.blocked_dot(v, self.matvec(v))

    def diagonal(self):
        return self.matrix.diagonal()

    def gershgorin_lower(self) -> float:
        m = abs(self.matrix)
        diag = self.matrix.diagonal()
        off = np.asarray(m.sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - off))

    def asymmetry(self) -> float:
        diff = self.matrix - self.matrix.T
        scale = abs(self.matrix).max()
        return float(abs(diff).max() / scale) if scale else 0.0

    def dump_coo(self, path):
        """Write ``row col value`` lines, one per stored entry, row-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"# {self.shape[0]} {self.shape[1]} {coo.nnz}\n")
            for k in order:
                fh.write(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}\n")


def _is_symmetric(coeff: CoefficientField, points):
    if coeff.symmetric is not None:
        return coeff.symmetric
    a = coeff(points)
    scale = np.abs(a).max()
    return bool(np.abs(a - np.swapaxes(a, 1, 2)).max() <= SYMMETRY_RTOL * max(scale, 1.0))


def assemble(grid: Grid, mask: DomainMask, coeff: CoefficientField, V=None) -> SparseOperator:
    """Flux-form finite-difference operator on the interior unknowns of ``mask``."""
    n = grid.dimension
    if coeff.dimension != n:
        raise AssemblyError("coefficient dimension does not match the grid")
    h = grid.spacing
    index = mask.index_map
    coords = grid.coordinates().reshape(grid.nodes + (n,))
    rows, cols, vals = [], [], []

    def add(r, c, v):
        keep = (r >= 0) & (c >= 0)
        rows.append(r[keep])
        cols.append(c[keep])
        vals.append(v[keep])

    def shifted(arr, offsets):
        sl = [slice(None)] * n
        for k, o in offsets.items():
            sl[k] = slice(o, arr.shape[k] - 1 + o)
        return arr[tuple(sl)]

    sym_probe = []
    for d in range(n):
        lo = shifted(index, {d: 0}).ravel()
        hi = shifted(index, {d: 1}).ravel()
        use = (lo >= 0) | (hi >= 0)
        mid = 0.5 * (shifted(coords, {d: 0}) + shifted(coords, {d: 1})).reshape(-1, n)[use]
        a = coeff(mid)
        sym_probe.append(mid[:64])
        if not np.all(np.isfinite(a)):
            raise AssemblyError("non-finite coefficient sample")
        w = a[:, d, d] / h[d] ** 2
        lo, hi = lo[use], hi[use]
        add(lo, lo, w)
        add(hi, hi, w)
        add(lo, hi, -w)
        add(hi, lo, -w)

    for i, j in combinations(range(n), 2):
        corners = {
            (0, 0): shifted(index, {i: 0, j: 0}).ravel(),
            (1, 0): shifted(index, {i: 1, j: 0}).ravel(),
            (0, 1): shifted(index, {i: 0, j: 1}).ravel(),
            (1, 1): shifted(index, {i: 1, j: 1}).ravel(),
        }
        use = np.zeros(corners[(0, 0)].shape, dtype=bool)
        for idx in corners.values():
            use |= idx >= 0
        center = 0.25 * sum(shifted(coords, {i: a_, j: b_}) for a_, b_ in corners)
        center = center.reshape(-1, n)[use]
        a = coeff(center)
        if not np.all(np.isfinite(a)):
            raise AssemblyError("non-finite coefficient sample")
        a_ij, a_ji = a[:, i, j], a[:, j, i]
        if not (np.any(a_ij) or np.any(a_ji)):
            continue
        ci = {k: (2 * k[0] - 1) / (2 * h[i]) for k in corners}
        cj = {k: (2 * k[1] - 1) / (2 * h[j]) for k in corners}
        for p, col in corners.items():
            for q, row in corners.items():
                w = a_ij * (ci[p] * cj[q]) + a_ji * (cj[p] * ci[q])
                add(row[use], col[use], w)

    diag_idx = np.arange(mask.count)
    if V is not None:
        potential = np.asarray(getattr(V, "values", V), dtype=float)
        if potential.shape != (mask.count,):
            raise AssemblyError("potential is not sampled on this mask")
        if not np.all(np.isfinite(potential)):
            raise AssemblyError("non-finite potential sample")
    else:
        potential = np.zeros(mask.count)
    rows.append(diag_idx)
    cols.append(diag_idx)
    vals.append(potential)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mask.count, mask.count),
    ).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    symmetric = _is_symmetric(coeff, np.concatenate(sym_probe + [mask.coordinates[:64]]))
    return SparseOperator(matrix, mask, symmetric)


def ellipticity_constant(coeff: CoefficientField, grid: Grid, mask: DomainMask) -> float:
    """Smallest eigenvalue of (a + a^T)/2 over interior nodes and face midpoints."""
    n = grid.dimension
    pts = [mask.coordinates]
    for d in range(n):
        step = np.zeros(n)
        step[d] = 0.5 * grid.spacing[d]
        pts += [mask.coordinates + step, mask.coordinates - step]
    pts = np.concatenate(pts)
    a = coeff(pts)
    sym = 0.5 * (a + np.swapaxes(a, 1, 2))
    lam = float(np.linalg.eigvalsh(sym)[:, 0].min())
    if not lam > 0:
        raise EllipticityError(f"coefficient is not uniformly elliptic (min eigenvalue {lam:g})")
    return lam


def weak_residual(op: SparseOperator, pair) -> float:
    """``||A u - lam u|| / ||u||``; the h^n quadrature weights cancel."""
    u = np.asarray(getattr(pair.u, "values", pair.u), dtype=float)
    norm = np.sqrt(kernels.blocked_dot(u, u))
    if norm == 0:
        raise DegenerateInputError("zero vector has no residual")
    r = op.matvec(u) - pair.lam * u
    return float(np.sqrt(kernels.blocked_dot(r, r)) / norm)
