"""Hot loops, each in a numba flavour and a pure-numpy flavour.

The public functions dispatch on :func:`rhlab._backend.requested_backend`,
read at call time so tests can flip ``RHLAB_BACKEND`` per case. Reductions
are ordered so that results do not depend on the thread count.
"""
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._backend import njit, prange, requested_backend

DOT_BLOCK = 4096


# -- CSR matrix-vector product -------------------------------------------------

@njit(parallel=True, cache=True)
def _csr_matvec_numba(indptr, indices, data, x):
    m = indptr.shape[0] - 1
    y = np.empty(m)
    for i in prange(m):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        y[i] = acc
    return y


def _csr_matvec_numpy(indptr, indices, data, x):
    products = data * x[indices]
    # every row carries its diagonal, so no empty segments reach reduceat
    return np.add.reduceat(products, indptr[:-1])


def csr_matvec(indptr, indices, data, x):
    if requested_backend() == "numba":
        return _csr_matvec_numba(indptr, indices, data, x)
    return _csr_matvec_numpy(indptr, indices, data, x)


# -- blocked dot product -------------------------------------------------------

@njit(parallel=True, cache=True)
def _blocked_dot_numba(x, y, block):
    n = x.shape[0]
    nblocks = (n + block - 1) // block
    partial = np.zeros(nblocks)
    for b in prange(nblocks):
        acc = 0.0
        stop = min(n, (b + 1) * block)
        for i in range(b * block, stop):
            acc += x[i] * y[i]
        partial[b] = acc
    total = 0.0
    for b in range(nblocks):
        total += partial[b]
    return total


def _blocked_dot_numpy(x, y, block):
    n = x.shape[0]
    total = 0.0
    for start in range(0, n, block):
        total += float(np.dot(x[start:start + block], y[start:start + block]))
    return total


def blocked_dot(x, y, block=DOT_BLOCK):
    if requested_backend() == "numba":
        return _blocked_dot_numba(x, y, block)
    return _blocked_dot_numpy(x, y, block)


# -- Jacobi-preconditioned conjugate gradients on (A - sigma I) --------------
#
# status: 0 converged, 1 iteration limit, 2 non-positive curvature.

@njit(parallel=True, cache=True)
def _pcg_numba(indptr, indices, data, sigma, inv_diag, b, x, tol, maxiter, block):
    n = b.shape[0]
    nblocks = (n + block - 1) // block
    partial = np.zeros(nblocks)
    r = np.empty(n)
    z = np.empty(n)
    p = np.empty(n)
    ap = np.empty(n)

    for i in prange(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        r[i] = b[i] - (acc - sigma * x[i])
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]

    for blk in prange(nblocks):
        acc = 0.0
        for i in range(blk * block, min(n, (blk + 1) * block)):
            acc += b[i] * b[i]
        partial[blk] = acc
    bb = 0.0
    for blk in range(nblocks):
        bb += partial[blk]
    bnorm = math.sqrt(bb)
    if bnorm == 0.0:
        for i in range(n):
            x[i] = 0.0
        return x, 0.0, 0, 0

    for blk in prange(nblocks):
        acc = 0.0
        for i in range(blk * block, min(n, (blk + 1) * block)):
            acc += r[i] * z[i]
        partial[blk] = acc
    rz = 0.0
    for blk in range(nblocks):
        rz += partial[blk]
    for blk in prange(nblocks):
        acc = 0.0
        for i in range(blk * block, min(n, (blk + 1) * block)):
            acc += r[i] * r[i]
        partial[blk] = acc
    rr = 0.0
    for blk in range(nblocks):
        rr += partial[blk]
    rnorm = math.sqrt(rr)

    it = 0
    while it < maxiter:
        if rnorm <= tol * bnorm:
            return x, rnorm / bnorm, it, 0
        for i in prange(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * p[indices[k]]
            ap[i] = acc - sigma * p[i]
        for blk in prange(nblocks):
            acc = 0.0
            for i in range(blk * block, min(n, (blk + 1) * block)):
                acc += p[i] * ap[i]
            partial[blk] = acc
        curvature = 0.0
        for blk in range(nblocks):
            curvature += partial[blk]
        if not curvature > 0.0:
            return x, rnorm / bnorm, it, 2
        step = rz / curvature
        for i in prange(n):
            x[i] += step * p[i]
            r[i] -= step * ap[i]
            z[i] = inv_diag[i] * r[i]
        for blk in prange(nblocks):
            acc = 0.0
            acc2 = 0.0
            for i in range(blk * block, min(n, (blk + 1) * block)):
                acc += r[i] * z[i]
                acc2 += r[i] * r[i]
            partial[blk] = acc
            ap[blk] = acc2
        rz_new = 0.0
        rr = 0.0
        for blk in range(nblocks):
            rz_new += partial[blk]
            rr += ap[blk]
        rnorm = math.sqrt(rr)
        beta = rz_new / rz
        rz = rz_new
        for i in prange(n):
            p[i] = z[i] + beta * p[i]
        it += 1
    status = 0 if rnorm <= tol * bnorm else 1
    return x, rnorm / bnorm, it, status


def _pcg_numpy(indptr, indices, data, sigma, inv_diag, b, x, tol, maxiter, block):
    def apply(v):
        return _csr_matvec_numpy(indptr, indices, data, v) - sigma * v

    def dot(u, v):
        return _blocked_dot_numpy(u, v, block)

    bnorm = math.sqrt(dot(b, b))
    if bnorm == 0.0:
        x[:] = 0.0
        return x, 0.0, 0, 0
    r = b - apply(x)
    z = inv_diag * r
    p = z.copy()
    rz = dot(r, z)
    rnorm = math.sqrt(dot(r, r))
    it = 0
    while it < maxiter:
        if rnorm <= tol * bnorm:
            return x, rnorm / bnorm, it, 0
        ap = apply(p)
        curvature = dot(p, ap)
        if not curvature > 0.0:
            return x, rnorm / bnorm, it, 2
        step = rz / curvature
        x += step * p
        r -= step * ap
        z = inv_diag * r
        rz_new = dot(r, z)
        rnorm = math.sqrt(dot(r, r))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, rnorm / bnorm, it, 0 if rnorm <= tol * bnorm else 1


def pcg(indptr, indices, data, sigma, inv_diag, b, x0, tol, maxiter, block=DOT_BLOCK):
    """Returns ``(x, relative_residual, iterations, status)``; ``x0`` is not modified."""
    x = np.array(x0, dtype=np.float64)
    args = (indptr, indices, data, float(sigma), np.ascontiguousarray(inv_diag, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64), x, float(tol), int(maxiter), int(block))
    if requested_backend() == "numba":
        return _pcg_numba(*args)
    return _pcg_numpy(*args)


# -- ball sums for the Morrey-Campanato scan ----------------------------------
#
# sums[c, k] = sum_i w(radii[k] - |x_i - centers[c]|) * values[i]
# with the partial-volume ramp w(t) = clip(t / width + 1/2, 0, 1).

@njit(parallel=True, cache=True)
def _ball_sums_numba(centers, nodes, values, radii, width):
    ncent = centers.shape[0]
    nnode = nodes.shape[0]
    nrad = radii.shape[0]
    dim = nodes.shape[1]
    half = 0.5 * width
    out = np.empty((ncent, nrad))
    for c in prange(ncent):
        full = np.zeros(nrad + 1)
        band = np.zeros(nrad)
        for i in range(nnode):
            v = values[i]
            if v == 0.0:
                continue
            d2 = 0.0
            for k in range(dim):
                t = nodes[i, k] - centers[c, k]
                d2 += t * t
            d = math.sqrt(d2)
            k0 = np.searchsorted(radii, d + half)
            full[k0] += v
            k = k0 - 1
            while k >= 0 and radii[k] > d - half:
                band[k] += v * ((radii[k] - d) / width + 0.5)
                k -= 1
        acc = 0.0
        for k in range(nrad):
            acc += full[k]
            out[c, k] = acc + band[k]
    return out


def _ball_sums_one(center, nodes, values, radii, width):
    nrad = radii.shape[0]
    half = 0.5 * width
    d = np.sqrt(((nodes - center) ** 2).sum(axis=1))
    k0 = np.searchsorted(radii, d + half, side="left")
    full = np.cumsum(np.bincount(k0, weights=values, minlength=nrad + 1)[:nrad])
    lo = np.searchsorted(radii, d - half, side="right")
    nband = k0 - lo
    band = np.zeros(nrad)
    for j in range(int(nband.max(initial=0))):
        sel = nband > j
        k = lo[sel] + j
        w = (radii[k] - d[sel]) / width + 0.5
        band += np.bincount(k, weights=values[sel] * w, minlength=nrad)
    return full + band


def _ball_sums_numpy(centers, nodes, values, radii, width, workers=1):
    keep = values != 0.0
    nodes, values = nodes[keep], values[keep]

    def run(c):
        return _ball_sums_one(centers[c], nodes, values, radii, width)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(centers.shape[0])))
    else:
        rows = [run(c) for c in range(centers.shape[0])]
    return np.array(rows).reshape(centers.shape[0], radii.shape[0])


def ball_sums(centers, nodes, values, radii, width, workers=1):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    if requested_backend() == "numba":
        return _ball_sums_numba(centers, nodes, values, radii, float(width))
    return _ball_sums_numpy(centers, nodes, values, radii, float(width), workers)
