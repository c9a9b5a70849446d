"""Time the hot kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--nodes 65] [--repeat 5]

Each kernel is run once untimed (JIT compile), then ``--repeat`` times; the
best wall time is printed, with the largest difference between backends.
"""
import argparse
import os
import time

import numpy as np

from rhlab import kernels
from rhlab.mesh import avoid_singularities, build_domain, build_grid
from rhlab.operator import CoefficientField, assemble
from rhlab.potentials import PowerLaw, sample_potential, sample_power


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=65)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    V = PowerLaw(-5.0, 1.0, (0.0, 0.0, 0.0))
    grid = avoid_singularities(build_grid(3, 16.0, args.nodes, origin=-8.0), [V.center])
    mask = build_domain(grid)
    op = assemble(grid, mask, CoefficientField.identity(3), sample_potential(V, grid, mask))
    indptr, indices, data = op._csr
    x = np.random.default_rng(0).standard_normal(op.shape[0])
    inv_diag = 1.0 / (op.diagonal() + 30.0)
    weights = sample_power(V, 2.0, mask)
    centers = mask.coordinates[:: max(1, mask.count // 64)]
    radii = np.geomspace(2 * grid.h, 16.0, 24)

    cases = {
        "csr_matvec": lambda: kernels.csr_matvec(indptr, indices, data, x),
        "blocked_dot": lambda: kernels.blocked_dot(x, x),
        "pcg(50 it)": lambda: kernels.pcg(indptr, indices, data, -30.0, inv_diag, x,
                                          np.zeros_like(x), 1e-30, 50)[0],
        "ball_sums": lambda: kernels.ball_sums(centers, mask.coordinates, weights, radii, grid.h),
    }
    print(f"{op.shape[0]} unknowns, {op.matrix.nnz} nonzeros, {centers.shape[0]} ball centres")
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    previous = os.environ.get("RHLAB_BACKEND")
    try:
        for name, fn in cases.items():
            result = {}
            for backend in ("numba", "numpy"):
                os.environ["RHLAB_BACKEND"] = backend
                result[backend] = best_of(fn, args.repeat)
            (t_nb, out_nb), (t_np, out_np) = result["numba"], result["numpy"]
            diff = float(np.max(np.abs(np.asarray(out_nb) - np.asarray(out_np))))
            print(f"{name:<14}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.2f}{diff:>12.2e}")
    finally:
        if previous is None:
            os.environ.pop("RHLAB_BACKEND", None)
        else:
            os.environ["RHLAB_BACKEND"] = previous


if __name__ == "__main__":
    main()
