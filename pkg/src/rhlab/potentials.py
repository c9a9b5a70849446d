"""Potentials V, their nodal samples, and Morrey-Campanato norms.

The Morrey-Campanato quantity of V on a ball B(x, rho) is

    rho^(alpha - n/r) * (int_B |V|^r)^(1/r)

and the norm is its supremum over centres and radii. V is extended by zero
outside the domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigurationError, DivergentIntegralError, HypothesisError
from .mesh import DomainMask, Grid
from .quadrature import singular_box_integral, sphere_area


# -- potential descriptions ----------------------------------------------------

class PotentialSpec:
    """Base class; subclasses are frozen dataclasses."""

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def singularities(self):
        """List of ``(center, exponent)`` pairs of point singularities."""
        return []

    def scaled(self, factor: float) -> "PotentialSpec":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _point(center):
    return tuple(float(c) for c in center)


@dataclass(frozen=True)
class PowerLaw(PotentialSpec):
    """``amplitude * |x - center|^(-exponent)``."""

    amplitude: float
    exponent: float
    center: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("power-law amplitude must be finite")
        # exponent < 2 is the theorem's hypothesis and is checked where the
        # theorem is used; here only local integrability in 3-d is required
        if not 0.0 < self.exponent < 3.0:
            raise ConfigurationError(
                f"power-law exponent must lie in (0, 3), got {self.exponent}"
            )

    def evaluate(self, points):
        d = np.linalg.norm(np.asarray(points) - np.asarray(self.center), axis=-1)
        return self.amplitude * d ** (-self.exponent)

    def singularities(self):
        return [(self.center, self.exponent)]

    def scaled(self, factor):
        return PowerLaw(self.amplitude * factor, self.exponent, self.center)

    def to_dict(self):
        return {"kind": "power_law", "amplitude": self.amplitude,
                "exponent": self.exponent, "center": list(self.center)}


@dataclass(frozen=True)
class Constant(PotentialSpec):
    value: float

    def evaluate(self, points):
        return np.full(np.asarray(points).shape[:-1], float(self.value))

    def scaled(self, factor):
        return Constant(self.value * factor)

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class BallWell(PotentialSpec):
    """``-depth`` inside the open ball, zero outside."""

    depth: float
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        if self.radius <= 0:
            raise ConfigurationError("ball-well radius must be positive")

    def evaluate(self, points):
        d = np.linalg.norm(np.asarray(points) - np.asarray(self.center), axis=-1)
        return np.where(d < self.radius, -float(self.depth), 0.0)

    def scaled(self, factor):
        return BallWell(self.depth * factor, self.center, self.radius)

    def to_dict(self):
        return {"kind": "ball_well", "depth": self.depth,
                "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Sum(PotentialSpec):
    terms: Tuple[PotentialSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ConfigurationError("a sum potential needs at least one term")

    def evaluate(self, points):
        return sum(t.evaluate(points) for t in self.terms)

    def singularities(self):
        return [s for t in self.terms for s in t.singularities()]

    def scaled(self, factor):
        return Sum(tuple(t.scaled(factor) for t in self.terms))

    def to_dict(self):
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


ZERO = Constant(0.0)


def potential_from_dict(data: dict) -> PotentialSpec:
    kind = data.get("kind")
    try:
        if kind in ("zero", None):
            return Constant(0.0)
        if kind == "constant":
            return Constant(float(data["value"]))
        if kind == "power_law":
            return PowerLaw(float(data["amplitude"]), float(data["exponent"]),
                            tuple(data["center"]))
        if kind == "ball_well":
            return BallWell(float(data["depth"]), tuple(data["center"]),
                            float(data["radius"]))
        if kind == "sum":
            return Sum(tuple(potential_from_dict(t) for t in data["terms"]))
    except KeyError as exc:
        raise ConfigurationError(f"potential of kind {kind!r} is missing {exc}") from None
    raise ConfigurationError(f"unknown potential kind {kind!r}")


# -- sampling ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values at the interior nodes of a mask, in unknown-index order."""

    values: np.ndarray
    mask: DomainMask

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mask.count,):
            raise ConfigurationError(
                f"field has {values.shape} values, mask has {self.mask.count} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> Grid:
        return self.mask.grid

    def __mul__(self, c):
        return ScalarField(self.values * c, self.mask)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(-self.values, self.mask)


def singular_cells(spec: PotentialSpec, mask: DomainMask):
    """Map unknown index -> (singular centre, exponent) for cells touching a singularity.

    The cell of a node is the box of side h centred on it. Only the strongest
    singularity per cell is kept.
    """
    grid = mask.grid
    half = 0.5 * grid.spacing
    found = {}
    coords = mask.coordinates
    for center, exponent in spec.singularities():
        c = np.asarray(center)
        lo = np.floor((c - half - np.asarray(grid.origin)) / grid.spacing - 1e-9).astype(int)
        hi = np.ceil((c + half - np.asarray(grid.origin)) / grid.spacing + 1e-9).astype(int)
        ranges = [range(max(l, 0), min(u, m - 1) + 1) for l, u, m in zip(lo, hi, grid.nodes)]
        for multi in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(grid.dimension, -1).T:
            idx = mask.index_map[tuple(multi)]
            if idx < 0:
                continue
            offset = np.abs(coords[idx] - c)
            if np.any(offset > half * (1 + 1e-9)):
                continue
            if np.all(offset < 1e-9 * grid.spacing):
                raise ConfigurationError(
                    f"interior node {coords[idx].tolist()} sits on a singularity; "
                    "offset the grid by half a cell"
                )
            if idx not in found or found[idx][1] < exponent:
                found[idx] = (c, exponent)
    return found


def cell_average(func, mask: DomainMask, idx: int, center, s: float) -> float:
    grid = mask.grid
    x = mask.coordinates[idx]
    half = 0.5 * grid.spacing
    total = singular_box_integral(func, x - half, x + half, center, s)
    return total / grid.cell_volume


def sample_potential(spec: PotentialSpec, grid: Grid, mask: DomainMask) -> ScalarField:
    """Nodal values of V; cells that contain a singularity get the cell average."""
    if mask.grid is not grid and mask.grid != grid:
        raise ConfigurationError("mask belongs to a different grid")
    for _, exponent in spec.singularities():
        if exponent >= grid.dimension:
            raise DivergentIntegralError(
                f"|x|^-{exponent} is not locally integrable in {grid.dimension} dimensions"
            )
    special = singular_cells(spec, mask)
    values = np.empty(mask.count)
    regular = np.ones(mask.count, dtype=bool)
    regular[list(special)] = False
    values[regular] = spec.evaluate(mask.coordinates[regular])
    for idx, (center, s) in special.items():
        values[idx] = cell_average(spec.evaluate, mask, idx, center, s)
    return ScalarField(values, mask)


def sample_power(spec: PotentialSpec, r: float, mask: DomainMask) -> np.ndarray:
    """Nodal samples of ``|V|^r`` with cell averages of ``|V|^r`` on singular cells."""
    special = singular_cells(spec, mask)
    for _, exponent in spec.singularities():
        if exponent * r >= mask.grid.dimension:
            raise DivergentIntegralError(
                f"|V|^{r} is not locally integrable: exponent {exponent} * r >= n"
            )
    values = np.abs(spec.evaluate(mask.coordinates)) ** r

    def power(points):
        return np.abs(spec.evaluate(points)) ** r

    for idx, (center, s) in special.items():
        values[idx] = cell_average(power, mask, idx, center, s * r)
    return values


# -- Morrey-Campanato norms ----------------------------------------------------

@dataclass(frozen=True)
class MCParams:
    alpha: float
    r: float
    rho_min: Optional[float] = None
    rho_max: Optional[float] = None
    stride: Optional[int] = None
    radii: int = 24

    def __post_init__(self):
        # class definition range; the stricter r > 2/alpha belongs to the
        # theorem and is checked by rhi.BoundConstants
        if not self.alpha > 0.0:
            raise HypothesisError(f"alpha must be positive, got {self.alpha}")
        if self.r < 1.0:
            raise HypothesisError(f"r must be at least 1, got {self.r}")
        if self.radii < 1:
            raise ConfigurationError("radius count must be at least 1")
        if self.stride is not None and self.stride < 1:
            raise ConfigurationError("center stride must be at least 1")
        if self.rho_min is not None and self.rho_min <= 0:
            raise ConfigurationError("rho_min must be positive")
        if (self.rho_min is not None and self.rho_max is not None
                and self.rho_max < self.rho_min):
            raise ConfigurationError("empty radius range")


@dataclass(frozen=True)
class MCNormEstimate:
    value: float
    center: Tuple[float, ...]
    radius: float
    alpha: float
    r: float
    rho_min: float
    rho_max: float
    n_centers: int
    n_radii: int
    stride: int

    def to_dict(self):
        return {
            "value": self.value, "center": list(self.center), "radius": self.radius,
            "alpha": self.alpha, "r": self.r, "rho_min": self.rho_min,
            "rho_max": self.rho_max, "n_centers": self.n_centers,
            "n_radii": self.n_radii, "stride": self.stride,
        }


def default_stride(mask: DomainMask) -> int:
    return max(1, (max(mask.grid.nodes) - 1) // 8)


def search_centers(spec: PotentialSpec, mask: DomainMask, stride: int) -> np.ndarray:
    """Every ``stride``-th interior node on each axis, plus singular centres in Ω's grid box."""
    grid = mask.grid
    multi = np.unravel_index(mask.flat_nodes, grid.nodes)
    pick = np.ones(mask.count, dtype=bool)
    for k in multi:
        pick &= (k % stride) == 0
    centers = [mask.coordinates[pick]]
    lo, hi = np.asarray(grid.origin), grid.upper
    extra = [c for c, _ in spec.singularities()
             if np.all(np.asarray(c) >= lo) and np.all(np.asarray(c) <= hi)]
    if extra:
        centers.append(np.asarray(extra, dtype=float))
    centers = np.unique(np.concatenate(centers, axis=0), axis=0)  # sorted lexicographically
    return centers


def mc_profile(weights, params: MCParams, mask: DomainMask, centers, workers=1):
    """Ball quantities for every (centre, radius) pair; returns (values, radii)."""
    grid = mask.grid
    n = grid.dimension
    rho_min = params.rho_min if params.rho_min is not None else 2.0 * float(grid.spacing.max())
    rho_max = params.rho_max if params.rho_max is not None else mask.diameter
    if rho_max < rho_min:
        raise ConfigurationError("empty radius range")
    radii = np.geomspace(rho_min, rho_max, params.radii)
    sums = kernels.ball_sums(centers, mask.coordinates, weights * grid.cell_volume,
                             radii, grid.lengthscale, workers=workers)
    values = radii ** (params.alpha - n / params.r) * np.maximum(sums, 0.0) ** (1.0 / params.r)
    return values, radii


def mc_norm(spec: PotentialSpec, params: MCParams, grid: Grid, mask: DomainMask,
            workers=1) -> MCNormEstimate:
    """Discrete ``||V||_{L^{alpha, r}}``: max over the centre x radius search set."""
    if mask.grid is not grid and mask.grid != grid:
        raise ConfigurationError("mask belongs to a different grid")
    if params.r > grid.dimension / params.alpha:
        raise HypothesisError(
            f"r = {params.r:g} exceeds n/alpha = {grid.dimension / params.alpha:g}"
        )
    stride = params.stride or default_stride(mask)
    centers = search_centers(spec, mask, stride)
    if centers.shape[0] == 0:
        raise ConfigurationError("empty centre search set")
    weights = sample_power(spec, params.r, mask)
    values, radii = mc_profile(weights, params, mask, centers, workers=workers)
    flat = int(np.argmax(values))
    c, k = np.unravel_index(flat, values.shape)
    return MCNormEstimate(
        value=float(values[c, k]),
        center=tuple(float(x) for x in centers[c]),
        radius=float(radii[k]),
        alpha=params.alpha, r=params.r,
        rho_min=float(radii[0]), rho_max=float(radii[-1]),
        n_centers=int(centers.shape[0]), n_radii=int(radii.shape[0]), stride=int(stride),
    )


def mc_norm_analytic(spec: PotentialSpec, alpha: float, r: float, n: int) -> Optional[float]:
    """Closed form for a single power law ``a|x-c|^-alpha``: ``|a| (sigma_{n-1}/(n - alpha r))^(1/r)``.

    Returns ``None`` for any other potential.
    """
    if not isinstance(spec, PowerLaw) or not math.isclose(spec.exponent, alpha):
        return None
    if alpha * r >= n:
        raise DivergentIntegralError(
            f"alpha*r = {alpha * r:g} >= n = {n}: the ball integral diverges"
        )
    return abs(spec.amplitude) * (sphere_area(n) / (n - alpha * r)) ** (1.0 / r)
