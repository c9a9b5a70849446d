"""Empirical checks of the functional inequalities behind the iteration.

``fp_ratio`` measures how much of the Fefferman-Phong constant a test
function uses, ``gns_ratio`` the same for the Sobolev embedding, and
``estimate_cn`` turns a bank of test functions into a usable C_n.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, HypothesisError, ConfigurationError
from .mesh import Ball, DomainMask, Grid, _box_bounds
from .norms import h1_seminorm, lp_norm
from .potentials import (
    MCParams, PotentialSpec, ScalarField, mc_norm, potential_from_dict, sample_potential,
)

DEFAULT_SAFETY_FACTOR = 2.0


def sobolev_ratio_bound(n: int) -> float:
    """Square of the sharp constant in ``||w||_{2n/(n-2)} <= S ||grad w||_2``."""
    if n < 3:
        raise HypothesisError("the Sobolev exponent 2n/(n-2) needs n >= 3")
    s = (math.gamma(n) / math.gamma(n / 2.0)) ** (1.0 / n) / math.sqrt(math.pi * n * (n - 2))
    return s * s


def hardy_constant(n: int) -> float:
    return 4.0 / (n - 2) ** 2


# -- test bank -----------------------------------------------------------------

def _van_der_corput(k: int) -> float:
    q, denom = 0.0, 1.0
    while k:
        denom *= 2.0
        k, bit = divmod(k, 2)
        q += bit / denom
    return q


@dataclass(frozen=True, eq=False)
class TestBank:
    fields: List[ScalarField]
    seed: int
    focus: tuple
    kinds: List[str] = field(default_factory=list)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not self.fields:
            raise ConfigurationError("test bank is empty")

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, k):
        return self.fields[k]


def _taper(mask: DomainMask, x):
    """Smooth factor vanishing on the domain boundary."""
    shape = mask.shape
    if isinstance(shape, Ball):
        c = np.asarray(shape.center, float)
        return np.maximum(0.0, 1.0 - np.sum((x - c) ** 2, axis=1) / float(shape.radius) ** 2)
    lo, hi = _box_bounds(mask.grid, shape)
    t = np.ones(x.shape[0])
    for d in range(x.shape[1]):
        t *= np.sin(np.pi * np.clip((x[:, d] - lo[d]) / (hi[d] - lo[d]), 0.0, 1.0))
    return t


def _extent(mask):
    if isinstance(mask.shape, Ball):
        c = np.asarray(mask.shape.center, float)
        r = float(mask.shape.radius)
        return c - r / math.sqrt(mask.grid.dimension), c + r / math.sqrt(mask.grid.dimension)
    return _box_bounds(mask.grid, mask.shape)


def bank_member(mask: DomainMask, k: int, seed: int, focus) -> tuple:
    """Member ``k`` of the bank; independent of the bank's size.

    Cycle of four: a bump centred on ``focus`` with width from a
    van der Corput ladder, a low-mode sine product, two random bumps.
    """
    x = mask.coordinates
    n = mask.grid.dimension
    lo, hi = _extent(mask)
    length = float(np.min(hi - lo))
    w_min = 2.0 * float(mask.grid.spacing.max())
    w_max = max(w_min, 0.25 * length)
    kind = k % 4
    if kind == 0:
        width = w_min * (w_max / w_min) ** _van_der_corput(k // 4)
        values = np.exp(-np.sum((x - np.asarray(focus)) ** 2, axis=1) / (2 * width ** 2))
        label = "centred_bump"
    elif kind == 1:
        j = k // 4
        modes = [1 + (j >> (2 * d)) % 3 for d in range(n)]
        values = np.ones(x.shape[0])
        for d in range(n):
            values *= np.sin(modes[d] * np.pi * (x[:, d] - lo[d]) / (hi[d] - lo[d]))
        values *= (np.all((x >= lo) & (x <= hi), axis=1))
        label = "sine_" + "".join(str(m) for m in modes)
    else:
        rng = np.random.default_rng([seed, k])
        center = lo + (hi - lo) * (0.2 + 0.6 * rng.random(n))
        width = w_min * (w_max / w_min) ** rng.random()
        values = np.exp(-np.sum((x - center) ** 2, axis=1) / (2 * width ** 2))
        label = "random_bump"
    values = values * _taper(mask, x)
    return ScalarField(values, mask), label


def make_test_bank(mask: DomainMask, size: int = 16, seed: int = 0, focus=None) -> TestBank:
    if size < 1:
        raise ConfigurationError("bank size must be at least 1")
    if focus is None:
        lo, hi = _extent(mask)
        focus = 0.5 * (lo + hi)
    focus = tuple(float(c) for c in focus)
    members = [bank_member(mask, k, seed, focus) for k in range(size)]
    return TestBank([m[0] for m in members], seed, focus, [m[1] for m in members])


# -- ratios --------------------------------------------------------------------

def _check_r(r):
    if not r > 1.0:
        raise HypothesisError(
            f"r = {r:g}: the Fefferman-Phong inequality needs r > 1 (it fails at r = 1)"
        )


def fp_ratio(g: ScalarField, v: PotentialSpec, r: float, grid: Grid, mask: DomainMask,
             v_norm: Optional[float] = None, v_sampled=None) -> float:
    """``int |g|^2 v / (||v||_{L^{2,r}} int |grad g|^2)``.

    ``v_norm`` and ``v_sampled`` may be passed in to skip recomputing the
    Morrey-Campanato norm and the singular-cell samples of ``v``.
    """
    _check_r(r)
    if not np.any(g.values):
        raise DegenerateInputError("test function is identically zero")
    if v_sampled is None:
        v_sampled = sample_potential(v, grid, mask).values
    if np.min(v_sampled) < 0:
        raise HypothesisError("the Fefferman-Phong weight must be non-negative")
    grad2 = h1_seminorm(g, grid) ** 2
    if grad2 == 0.0:
        raise DegenerateInputError("test function has zero gradient")
    numerator = float(np.sum(g.values ** 2 * v_sampled)) * grid.cell_volume
    if numerator == 0.0:
        return 0.0
    if v_norm is None:
        v_norm = mc_norm(v, MCParams(2.0, r), grid, mask).value
    return numerator / (v_norm * grad2)


def gns_ratio(w: ScalarField, grid: Grid, mask: DomainMask) -> float:
    """``||w||_{2 omega}^2 / ||grad w||_2^2`` with ``omega = n/(n-2)``."""
    n = grid.dimension
    if n < 3:
        raise HypothesisError("the Sobolev step needs n >= 3 (omega = n/(n-2) is undefined for n = 2)")
    omega = n / (n - 2.0)
    grad = h1_seminorm(w, grid)
    if grad == 0.0:
        raise DegenerateInputError("test function has zero gradient")
    return lp_norm(w, 2.0 * omega, grid) ** 2 / grad ** 2


@dataclass
class CnEstimate:
    value: float
    index: int
    potential_index: int
    potential: dict
    r: float
    n: int
    bank_size: int
    bank_seed: int
    v_norm: float
    degenerate: bool = False
    safety_factor: float = DEFAULT_SAFETY_FACTOR

    @property
    def cn(self) -> float:
        """Constant handed to C_alpha: the estimate times the safety factor."""
        return self.value * self.safety_factor

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CnEstimate":
        try:
            with open(path) as fh:
                data = json.load(fh)
            return cls(**data)
        except (OSError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"cannot read calibration record {path}: {exc}") from None


def estimate_cn(bank: TestBank, potentials: Sequence[PotentialSpec], r: float,
                workers: int = 1, safety_factor: float = DEFAULT_SAFETY_FACTOR) -> CnEstimate:
    """Largest ``fp_ratio`` over bank x potentials; first index wins ties."""
    _check_r(r)
    if not potentials:
        raise ConfigurationError("no potentials to calibrate against")
    mask = bank[0].mask
    grid = mask.grid
    best = None
    for j, v in enumerate(potentials):
        sampled = sample_potential(v, grid, mask).values
        if np.min(sampled) < 0:
            raise HypothesisError("the Fefferman-Phong weight must be non-negative")
        if np.any(sampled):
            v_norm = mc_norm(v, MCParams(2.0, r), grid, mask, workers=workers).value
        else:
            v_norm = 0.0
        for k, g in enumerate(bank.fields):
            ratio = fp_ratio(g, v, r, grid, mask, v_norm=v_norm, v_sampled=sampled)
            if best is None or ratio > best[0]:
                best = (ratio, k, j, v_norm)
    ratio, k, j, v_norm = best
    return CnEstimate(
        value=float(ratio), index=k, potential_index=j,
        potential=potentials[j].to_dict(), r=float(r), n=grid.dimension,
        bank_size=len(bank), bank_seed=bank.seed, v_norm=float(v_norm),
        degenerate=ratio == 0.0, safety_factor=float(safety_factor),
    )
