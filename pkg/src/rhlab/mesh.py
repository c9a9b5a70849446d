"""Uniform tensor grids on axis-aligned boxes and Dirichlet domain masks."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DegenerateDomainError

SUPPORTED_DIMENSIONS = (2, 3)


def _as_tuple(value, n, name, cast=float):
    if np.isscalar(value):
        return (cast(value),) * n
    values = tuple(cast(v) for v in value)
    if len(values) != n:
        raise ConfigurationError(
            f"{name} has {len(values)} entries, expected {n} for a {n}-d grid"
        )
    return values


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid; node ``k`` on axis ``d`` sits at ``origin[d] + k*spacing[d]``."""

    dimension: int
    extents: tuple
    nodes: tuple
    origin: tuple

    def __post_init__(self):
        if self.dimension not in SUPPORTED_DIMENSIONS:
            raise ConfigurationError(f"dimension must be 2 or 3, got {self.dimension}")
        if min(self.nodes) < 3:
            raise ConfigurationError("need at least 3 nodes per axis")
        if min(self.extents) <= 0:
            raise ConfigurationError("extents must be positive")

    @property
    def shape(self):
        return self.nodes

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array([e / (m - 1) for e, m in zip(self.extents, self.nodes)])

    @property
    def h(self) -> float:
        """Spacing, when it is the same on every axis (the usual case)."""
        sp = self.spacing
        if np.ptp(sp) > 1e-12 * sp.max():
            raise ConfigurationError("grid spacing differs between axes")
        return float(sp[0])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lengthscale(self) -> float:
        """Side of the cube with the same volume as one cell."""
        return self.cell_volume ** (1.0 / self.dimension)

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    def axes(self):
        return [o + h * np.arange(m) for o, h, m in zip(self.origin, self.spacing, self.nodes)]

    def coordinates(self, flat_index=None) -> np.ndarray:
        """Coordinates of nodes in lexicographic (C) order, shape ``(m, n)``."""
        if flat_index is None:
            flat_index = np.arange(self.size)
        multi = np.unravel_index(np.asarray(flat_index), self.nodes)
        return np.stack(
            [o + h * k for o, h, k in zip(self.origin, self.spacing, multi)], axis=-1
        )

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.extents)

    def shifted(self, offset) -> "Grid":
        offset = _as_tuple(offset, self.dimension, "offset")
        return replace(self, origin=tuple(o + d for o, d in zip(self.origin, offset)))


def build_grid(n: int, extents, nodes_per_axis, origin=None) -> Grid:
    """Uniform grid on ``[origin, origin + extents]``.

    >>> build_grid(3, 1.0, 33).h
    0.03125
    """
    if n not in SUPPORTED_DIMENSIONS:
        raise ConfigurationError(f"dimension must be 2 or 3, got {n}")
    extents = _as_tuple(extents, n, "extents")
    nodes = _as_tuple(nodes_per_axis, n, "nodes_per_axis", cast=int)
    origin = _as_tuple(0.0 if origin is None else origin, n, "origin")
    return Grid(n, extents, nodes, origin)


def singularity_offset(grid: Grid, points, tol=1e-9) -> np.ndarray:
    """Per-axis shift (0 or h/2) that moves every point off the node planes."""
    offset = np.zeros(grid.dimension)
    for point in points:
        point = np.asarray(point, dtype=float)
        k = (point - np.asarray(grid.origin)) / grid.spacing
        on_plane = np.abs(k - np.round(k)) < tol
        offset[on_plane] = 0.5 * grid.spacing[on_plane]
    return offset


def avoid_singularities(grid: Grid, points) -> Grid:
    """Grid translated by ``singularity_offset``; a default Box follows it."""
    offset = singularity_offset(grid, points)
    if not offset.any():
        return grid
    return grid.shifted(offset)


@dataclass(frozen=True)
class Box:
    lo: Union[Sequence[float], None] = None
    hi: Union[Sequence[float], None] = None
    kind: str = field(default="box", init=False)


@dataclass(frozen=True)
class Ball:
    center: Sequence[float]
    radius: float
    kind: str = field(default="ball", init=False)


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Interior (unknown) nodes of a grid; everything else is Dirichlet zero."""

    grid: Grid
    flags: np.ndarray
    shape: Union[Box, Ball]

    @cached_property
    def count(self) -> int:
        return int(self.flags.sum())

    @cached_property
    def flat_nodes(self) -> np.ndarray:
        """Flat grid indices of interior nodes; position in this array is the unknown index."""
        return np.flatnonzero(self.flags.ravel())

    @cached_property
    def index_map(self) -> np.ndarray:
        """Grid-shaped array of unknown indices, -1 on exterior nodes."""
        index = np.full(self.grid.size, -1, dtype=np.int64)
        index[self.flat_nodes] = np.arange(self.count)
        return index.reshape(self.grid.nodes)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return self.grid.coordinates(self.flat_nodes)

    @property
    def measure(self) -> float:
        """Nodal-quadrature measure of the domain."""
        return self.count * self.grid.cell_volume

    @property
    def diameter(self) -> float:
        if isinstance(self.shape, Ball):
            return 2.0 * float(self.shape.radius)
        lo, hi = _box_bounds(self.grid, self.shape)
        return float(np.linalg.norm(hi - lo))

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        """Scatter interior values into a zero-padded grid-shaped array."""
        full = np.zeros(self.grid.size, dtype=np.asarray(values).dtype)
        full[self.flat_nodes] = values
        return full.reshape(self.grid.nodes)

    def describe(self) -> dict:
        out = {"kind": self.shape.kind, "interior_nodes": self.count}
        if isinstance(self.shape, Ball):
            out.update(center=[float(c) for c in self.shape.center], radius=float(self.shape.radius))
        else:
            lo, hi = _box_bounds(self.grid, self.shape)
            out.update(lo=lo.tolist(), hi=hi.tolist())
        return out


def _box_bounds(grid, box):
    lo = np.asarray(grid.origin, float) if box.lo is None else np.asarray(box.lo, float)
    hi = grid.upper if box.hi is None else np.asarray(box.hi, float)
    return lo, hi


def build_domain(grid: Grid, shape: Union[str, Box, Ball] = "box") -> DomainMask:
    if isinstance(shape, str):
        if shape != "box":
            raise ConfigurationError(f"unknown domain shape {shape!r}")
        shape = Box()
    coords = grid.coordinates().reshape(grid.nodes + (grid.dimension,))
    tol = 1e-9 * float(grid.spacing.min())
    lo_grid, hi_grid = np.asarray(grid.origin), grid.upper

    if isinstance(shape, Box):
        lo, hi = _box_bounds(grid, shape)
        if np.any(lo < lo_grid - tol) or np.any(hi > hi_grid + tol):
            raise ConfigurationError("box does not fit inside the grid")
        inside = np.all((coords > lo + tol) & (coords < hi - tol), axis=-1)
    elif isinstance(shape, Ball):
        center = np.asarray(shape.center, float)
        if center.shape != (grid.dimension,):
            raise ConfigurationError("ball center has the wrong dimension")
        radius = float(shape.radius)
        if radius < 0:
            raise ConfigurationError("ball radius must be non-negative")
        if np.any(center - radius < lo_grid - tol) or np.any(center + radius > hi_grid + tol):
            raise ConfigurationError("ball does not fit inside the grid")
        dist = np.linalg.norm(coords - center, axis=-1)
        inside = dist < radius - tol
    else:
        raise ConfigurationError(f"unknown domain shape {shape!r}")

    boundary_layer = np.zeros(grid.nodes, dtype=bool)
    for axis in range(grid.dimension):
        edge = [slice(None)] * grid.dimension
        edge[axis] = [0, -1]
        boundary_layer[tuple(edge)] = True
    flags = inside & ~boundary_layer

    if not flags.any():
        raise DegenerateDomainError("domain has no interior nodes")
    _, components = ndimage.label(flags)
    if components != 1:
        raise DegenerateDomainError(f"domain mask has {components} connected components")
    flags.setflags(write=False)
    return DomainMask(grid, flags, shape)
