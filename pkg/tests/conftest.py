import numpy as np
import pytest

from rhlab.mesh import build_domain, build_grid


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    monkeypatch.setenv("RHLAB_BACKEND", request.param)
    return request.param


@pytest.fixture(scope="session")
def cube16():
    grid = build_grid(3, 1.0, 17)
    return grid, build_domain(grid)


@pytest.fixture(scope="session")
def cube64():
    grid = build_grid(3, 1.0, 65)
    return grid, build_domain(grid)


def sine_product(x, modes=None):
    modes = modes or (1,) * x.shape[1]
    out = np.ones(x.shape[0])
    for d, k in enumerate(modes):
        out *= np.sin(k * np.pi * x[:, d])
    return out
