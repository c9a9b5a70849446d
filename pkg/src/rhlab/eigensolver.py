"""Smallest eigenpairs by shift-invert power iteration.

Each outer step solves ``(A - sigma I) y = x`` with a Krylov method and
normalises ``y``. The shift starts below the Gershgorin bound; for symmetric
operators it is then raised towards the Rayleigh quotient, but never past
``rho - SHIFT_GUARD * ||r||``, so it stays below the eigenvalue being sought
and the shifted system remains positive definite.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import kernels
from .errors import ConfigurationError, SolverError, UnsupportedSpectrumError
from .operator import SparseOperator, weak_residual
from .potentials import ScalarField

log = logging.getLogger(__name__)

SHIFT_GUARD = 3.0
SHIFT_WARMUP = 5
INNER_LOOSEST = 1e-3
INNER_FACTOR = 0.1


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 500
    shift: Optional[float] = None
    linear_tolerance: float = 1e-10
    linear_max_iterations: int = 20000

    def __post_init__(self):
        for name in ("tolerance", "linear_tolerance"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {value}")
        if self.max_iterations < 1 or self.linear_max_iterations < 1:
            raise ConfigurationError("iteration limits must be at least 1")

    def to_dict(self):
        return {"tolerance": self.tolerance, "max_iterations": self.max_iterations,
                "shift": self.shift, "linear_tolerance": self.linear_tolerance,
                "linear_max_iterations": self.linear_max_iterations}


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    u: ScalarField
    residual: float
    iterations: int


def _dot(x, y):
    return kernels.blocked_dot(x, y)


def _norm(x):
    return float(np.sqrt(_dot(x, x)))


def _project(x, Q):
    for q in Q:
        x = x - _dot(q, x) * q
    return x


def _jacobi(op, sigma):
    diag = op.diagonal() - sigma
    if np.any(diag <= 0):
        return np.ones_like(diag)
    return 1.0 / diag


def _cg(op, b, sigma, tol, maxiter, x0=None, Q=()):
    if not Q:
        indptr, indices, data = op._csr
        start = np.zeros_like(b) if x0 is None else x0
        x, res, it, status = kernels.pcg(indptr, indices, data, sigma, _jacobi(op, sigma),
                                         b, start, tol, maxiter)
        if status == 2:
            raise SolverError(
                f"shifted operator is singular or indefinite at sigma={sigma:.12g}", residual=res)
        if status == 1:
            raise SolverError(
                f"CG did not reach relative residual {tol:g} in {maxiter} iterations",
                residual=res)
        return x, res, it
    return _cg_projected(op, b, sigma, tol, maxiter, x0, Q)


def _cg_projected(op, b, sigma, tol, maxiter, x0, Q):
    """Jacobi-preconditioned CG on ``P (A - sigma I) P`` with ``P`` projecting out ``Q``."""
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0
    inv_diag = _jacobi(op, sigma)

    def apply(v):
        return _project(op.matvec(v) - sigma * v, Q)

    x = np.zeros_like(b) if x0 is None else _project(np.array(x0, dtype=float), Q)
    r = b - apply(x) if x0 is not None else b.copy()
    z = _project(inv_diag * r, Q)
    p = z.copy()
    rz = _dot(r, z)
    rnorm = _norm(r)
    for it in range(1, maxiter + 1):
        if rnorm <= tol * bnorm:
            return x, rnorm / bnorm, it - 1
        ap = apply(p)
        curvature = _dot(p, ap)
        if not curvature > 0:
            raise SolverError(
                f"shifted operator is singular or indefinite at sigma={sigma:.12g}",
                residual=rnorm / bnorm,
            )
        step = rz / curvature
        x += step * p
        r -= step * ap
        rnorm = _norm(r)
        z = _project(inv_diag * r, Q)
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if rnorm <= tol * bnorm:
        return x, rnorm / bnorm, maxiter
    raise SolverError(
        f"CG did not reach relative residual {tol:g} in {maxiter} iterations",
        residual=rnorm / bnorm,
    )


def _gmres(op, b, sigma, tol, maxiter, x0=None, Q=()):
    n = b.shape[0]

    def mv(v):
        return _project(op.matvec(v) - sigma * v, Q)

    lin = LinearOperator((n, n), matvec=mv, dtype=float)
    x, info = gmres(lin, b, x0=x0, rtol=tol, atol=0.0, restart=min(60, n),
                    maxiter=max(1, maxiter // 60))
    res = _norm(b - mv(x)) / max(_norm(b), 1e-300)
    if info != 0 and res > tol:
        raise SolverError(f"GMRES did not converge (info={info})", residual=res)
    return x, res, info


def _solve(op, b, sigma, tol, maxiter, x0=None, Q=()):
    solver = _cg if op.symmetric else _gmres
    x, res, _ = solver(op, b, sigma, tol, maxiter, x0=x0, Q=Q)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values", residual=res)
    return x


def solve_linear(op: SparseOperator, rhs, config: SolverConfig = SolverConfig()) -> ScalarField:
    """Solve ``(A - sigma I) x = rhs`` to ``config.linear_tolerance``; sigma defaults to 0."""
    b = np.asarray(getattr(rhs, "values", rhs), dtype=float)
    sigma = 0.0 if config.shift is None else float(config.shift)
    x = _solve(op, b, sigma, config.linear_tolerance, config.linear_max_iterations)
    return ScalarField(x, op.mask)


def initial_shift(op: SparseOperator) -> float:
    lower = op.gershgorin_lower()
    return lower - 1e-2 * max(1.0, abs(lower))


def _normalise(op, x):
    """Unit discrete L2 norm (weight h^n) and non-negative mean."""
    weight = op.grid.cell_volume
    x = x / np.sqrt(_dot(x, x) * weight)
    if x.sum() < 0:
        x = -x
    return x


def _ritz_pair_complex(op, x_prev, x_new):
    """True when A restricted to span{x_prev, x_new} has a complex eigenvalue pair."""
    v1 = x_prev / _norm(x_prev)
    v2 = x_new - _dot(v1, x_new) * v1
    if _norm(v2) < 1e-12 * _norm(x_new):
        return False
    v2 /= _norm(v2)
    basis = (v1, v2)
    H = np.array([[_dot(a, op.matvec(b)) for b in basis] for a in basis])
    ev = np.linalg.eigvals(H)
    return bool(np.max(np.abs(ev.imag)) > 1e-8 * max(1.0, np.max(np.abs(ev.real))))


def _start_vector(count, index):
    if index == 0:
        return np.ones(count)
    rng = np.random.default_rng(index)
    return np.ones(count) + rng.standard_normal(count)


def smallest_eigenpairs(op: SparseOperator, k: int = 1,
                        config: SolverConfig = SolverConfig(), start=None) -> List[EigenPair]:
    """``start`` optionally replaces the starting vector of the first pair."""
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    if k > op.shape[0]:
        raise ConfigurationError("k exceeds the number of unknowns")
    pairs: List[EigenPair] = []
    Q: list = []
    base_shift = initial_shift(op) if config.shift is None else float(config.shift)
    for index in range(k):
        if index == 0 and start is not None:
            x = np.array(getattr(start, "values", start), dtype=float)
            if x.shape != (op.shape[0],) or not np.all(np.isfinite(x)) or not np.any(x):
                raise ConfigurationError("start vector does not match the operator")
        else:
            x = _project(_start_vector(op.shape[0], index), Q)
        x /= _norm(x)
        sigma = safe_sigma = base_shift
        adaptive = op.symmetric and config.shift is None
        guard = SHIFT_GUARD
        streak = 0
        rho = _dot(x, op.matvec(x))
        residual = np.inf
        converged = False
        x_prev = x
        for it in range(1, config.max_iterations + 1):
            guess = x / (rho - sigma) if rho > sigma else None
            # inner accuracy tracks the outer residual; exact solves are wasted early on
            # floor below tolerance/|rho - sigma|, else the warm start already
            # passes the inner test and the iteration stalls
            scale = max(abs(rho), abs(rho - sigma), 1.0)
            floor = min(config.linear_tolerance, INNER_FACTOR ** 2 * config.tolerance / scale)
            inner = min(INNER_LOOSEST, max(floor, INNER_FACTOR * residual / scale))
            try:
                y = _solve(op, x, sigma, inner,
                           config.linear_max_iterations, x0=guess, Q=Q)
            except SolverError:
                if sigma == safe_sigma:
                    raise
                log.debug("shift %.6g rejected; back to %.6g", sigma, safe_sigma)
                sigma, guard, streak = safe_sigma, 2.0 * guard, 0
                continue
            safe_sigma = sigma
            y = _project(y, Q)
            x_prev, x = x, y / _norm(y)
            ax = op.matvec(x)
            rho = _dot(x, ax)
            r = _project(ax - rho * x, Q) if Q else ax - rho * x
            last, residual = residual, _norm(r)
            log.debug("eig %d it %d rho=%.12g res=%.3e sigma=%.6g", index, it, rho, residual, sigma)
            if residual <= config.tolerance:
                converged = True
                break
            # a steadily falling residual means the target eigenvector dominates,
            # so [rho - ||r||, rho] brackets the eigenvalue being sought
            streak = streak + 1 if residual < last else 0
            if adaptive and streak >= SHIFT_WARMUP:
                sigma = max(sigma, rho - guard * residual)
        if not converged:
            if not op.symmetric and _ritz_pair_complex(op, x_prev, x):
                raise UnsupportedSpectrumError(
                    "complex Ritz values: the operator's spectrum is not real here",
                    residual=residual, partial=pairs,
                )
            raise SolverError(
                f"eigenpair {index} not converged after {config.max_iterations} iterations",
                residual=residual, partial=pairs,
            )
        u = _normalise(op, x)
        pair = EigenPair(float(rho), ScalarField(u, op.mask), 0.0, it)
        pair = EigenPair(pair.lam, pair.u, weak_residual(op, pair), it)
        pairs.append(pair)
        Q.append(x.copy())
    return pairs
