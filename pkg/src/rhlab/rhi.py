"""Explicit constants of the reverse Hölder bound and their numerical checks.

For an eigenfunction u of the Schrödinger-type operator the bound reads

    ||u||_q <= C * factor(n, p, alpha, C_alpha) * ||u||_p,   q >= p > 0,

with C unspecified. ``verify_rhi`` reports ``ratio / factor`` per query so the
sweep yields an empirical C. ``moser_trace`` follows the L^tau ladder
tau_i = p * omega^i, omega = n/(n-2), that produces the factor.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .eigensolver import SolverConfig, smallest_eigenpairs
from .errors import ConfigurationError, HypothesisError
from .mesh import Ball, build_domain, build_grid
from .norms import lp_norm, signed_parts
from .operator import CoefficientField, assemble
from .potentials import ScalarField

LADDER_REJECTION = (
    "the Moser ladder starts at tau = p >= 2; for p < 2 the bound is obtained "
    "from the p = 2 case, which is why the growth factor uses max{p, 2}"
)


def _omega(n):
    if n < 3:
        raise HypothesisError(f"n = {n}: omega = n/(n-2) needs n >= 3")
    return n / (n - 2.0)


def _check_alpha(alpha):
    if not 0.0 < alpha < 2.0:
        raise HypothesisError(f"alpha = {alpha:g} lies outside (0, 2)")


def c_alpha(alpha: float, cn: float, ellipticity: float, mc: float) -> float:
    """``1 + alpha^(alpha/(2-alpha)) * (2 C_n mc / Lambda)^(2/(2-alpha))``."""
    _check_alpha(alpha)
    if not ellipticity > 0:
        raise HypothesisError("the ellipticity constant must be positive")
    if cn < 0 or mc < 0:
        raise HypothesisError("C_n and the Morrey-Campanato norm must be non-negative")
    base = 2.0 * cn * mc / ellipticity
    return 1.0 + alpha ** (alpha / (2.0 - alpha)) * base ** (2.0 / (2.0 - alpha))


def growth_factor(n: int, p: float, alpha: float, calpha: float, telescoped: bool = False) -> float:
    """``C_alpha^(n/2p) * max(p,2)^(n/(p(2-alpha))) * omega^e``.

    ``e = n(n-2)/(p(2-alpha))`` as stated with the theorem; ``telescoped=True``
    uses the value the geometric series actually produces, half of that.
    """
    omega = _omega(n)
    _check_alpha(alpha)
    if not p > 0:
        raise HypothesisError(f"p = {p:g} must be positive")
    if not calpha >= 1.0:
        raise HypothesisError(f"C_alpha = {calpha:g} is below 1")
    e = n * (n - 2) / (p * (2.0 - alpha))
    if telescoped:
        e /= 2.0
    return (calpha ** (n / (2.0 * p))
            * max(p, 2.0) ** (n / (p * (2.0 - alpha)))
            * omega ** e)


@dataclass(frozen=True)
class BoundConstants:
    n: int
    ellipticity: float
    lam: float
    alpha: float
    r: float
    cn: float
    mc: float
    calpha: float = field(default=None)

    def __post_init__(self):
        if not self.ellipticity > 0:
            raise HypothesisError("the ellipticity constant must be positive")
        _check_alpha(self.alpha)
        if not self.r > 2.0 / self.alpha:
            raise HypothesisError(
                f"r = {self.r:g} must exceed 2/alpha = {2.0 / self.alpha:g}")
        exact = c_alpha(self.alpha, self.cn, self.ellipticity, self.mc)
        if self.calpha is None:
            object.__setattr__(self, "calpha", exact)
        elif self.calpha != exact:
            raise ConfigurationError("stored C_alpha disagrees with its formula")

    def factor(self, p, telescoped=False):
        return growth_factor(self.n, p, self.alpha, self.calpha, telescoped)

    def to_dict(self):
        return {"n": self.n, "ellipticity": self.ellipticity, "lambda": self.lam,
                "alpha": self.alpha, "r": self.r, "C_n": self.cn, "mc": self.mc,
                "C_alpha": self.calpha}


# -- reverse Hölder sweep -------------------------------------------------------

def _fmt(x):
    return "inf" if math.isinf(x) else repr(float(x))


@dataclass
class RHIRow:
    p: float
    q: float
    norm_p: Optional[float] = None
    norm_q: Optional[float] = None
    ratio: Optional[float] = None
    factor: Optional[float] = None
    fitted_C: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self):
        return {k: (_fmt(v) if isinstance(v, float) and math.isinf(v) else v)
                for k, v in self.__dict__.items()}

    def csv_fields(self):
        return [_fmt(self.p), _fmt(self.q), repr(self.norm_p), repr(self.norm_q),
                repr(self.ratio), repr(self.factor), repr(self.fitted_C)]


@dataclass
class RHIReport:
    rows: List[RHIRow]
    parts: dict
    constants: BoundConstants
    metadata: dict

    CSV_HEADER = ("p", "q", "norm_p", "norm_q", "ratio", "factor", "fitted_C")

    @property
    def valid_rows(self):
        return [row for row in self.rows if row.error is None]

    @property
    def max_fitted_C(self) -> Optional[float]:
        values = [row.fitted_C for row in self.valid_rows]
        return max(values) if values else None

    def to_dict(self):
        return {
            "constants": self.constants.to_dict(),
            "metadata": self.metadata,
            "max_fitted_C": self.max_fitted_C,
            "rows": [row.to_dict() for row in self.rows],
            "parts": {k: [row.to_dict() for row in v] for k, v in self.parts.items()},
        }

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_HEADER)]
        lines += [",".join(row.csv_fields()) for row in self.valid_rows]
        return "\n".join(lines) + "\n"


def _norm_table(u, exponents, workers):
    exponents = sorted(set(exponents))

    def one(p):
        return lp_norm(u, p)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, exponents))
    else:
        values = [one(p) for p in exponents]
    return dict(zip(exponents, values))


def _rows(u, constants, queries, workers):
    ok = [(p, q) for p, q in queries if p > 0 and q >= p]
    norms = _norm_table(u, [x for pq in ok for x in pq], workers)
    rows = []
    for p, q in queries:
        if not p > 0:
            rows.append(RHIRow(p, q, error="p must be positive"))
            continue
        if q < p:
            rows.append(RHIRow(p, q, error="q < p: the bound only runs from L^p up to L^q"))
            continue
        norm_p, norm_q = norms[p], norms[q]
        if norm_p == 0.0:
            rows.append(RHIRow(p, q, norm_p, norm_q, error="field vanishes"))
            continue
        ratio = norm_q / norm_p
        factor = constants.factor(p)
        rows.append(RHIRow(p, q, norm_p, norm_q, ratio, factor, ratio / factor))
    return rows


def verify_rhi(u, constants: BoundConstants, queries: Sequence, grid=None, mask=None,
               metadata: Optional[dict] = None, workers: int = 1) -> RHIReport:
    """Sweep ``(p, q)`` queries on ``u`` and on its signed parts ``f`` and ``g``.

    ``u`` may be an eigenpair or a field. Rows keep the order of ``queries``.
    """
    field_ = getattr(u, "u", u)
    if not isinstance(field_, ScalarField):
        raise ConfigurationError("verify_rhi needs a ScalarField or an EigenPair")
    if mask is not None and field_.mask is not mask:
        raise ConfigurationError("field does not live on the given mask")
    queries = [(float(p), float(q)) for p, q in queries]
    if not queries:
        raise ConfigurationError("no (p, q) queries")
    f, g = signed_parts(field_)
    rows = _rows(field_, constants, queries, workers)
    parts = {name: _rows(part, constants, queries, workers)
             for name, part in (("f", f), ("g", g))}
    meta = dict(metadata or {})
    meta.setdefault("h", [float(s) for s in field_.mask.grid.spacing])
    return RHIReport(rows, parts, constants, meta)


# -- Moser ladder ---------------------------------------------------------------

def ladder_exponents(n: int, p: float, levels: int) -> np.ndarray:
    """``tau_i = p * omega^i`` for ``i = 0..levels``."""
    omega = _omega(n)
    return p * omega ** np.arange(levels + 1, dtype=float)


def exponent_partial_sum(n: int, p: float, terms: int) -> float:
    """``sum_{k=1..terms} 1/(p omega^(k-1))``; tends to ``n/(2p)``."""
    return float(np.sum(1.0 / ladder_exponents(n, p, terms - 1)))


def step_bound(tau: float, alpha: float, calpha: float) -> float:
    tau = float(tau)
    return float(calpha ** (1.0 / tau) * tau ** (2.0 / (tau * (2.0 - alpha))))


def ladder_product(n, p, alpha, calpha, terms) -> float:
    """Product of the step bounds over ``terms`` rungs, accumulated in logs."""
    taus = ladder_exponents(n, p, terms - 1)
    logs = np.log(calpha) / taus + 2.0 * np.log(taus) / (taus * (2.0 - alpha))
    return float(np.exp(np.sum(logs)))


def ladder_closed_form(n, p, alpha, calpha) -> float:
    """Infinite product of step bounds, ``C^(n/2p) p^(n/(p(2-a))) omega^(n(n-2)/(2p(2-a)))``."""
    omega = _omega(n)
    return (calpha ** (n / (2.0 * p)) * p ** (n / (p * (2.0 - alpha)))
            * omega ** (n * (n - 2) / (2.0 * p * (2.0 - alpha))))


@dataclass
class MoserTrace:
    p: float
    omega: float
    rows: List[dict]
    max_implied: float
    variation: float
    bound_product: float
    closed_form: float
    paper_factor: float
    exponent_sum: float

    CSV_HEADER = ("i", "tau", "norm", "step_ratio", "step_bound", "implied")

    def to_dict(self):
        return dict(self.__dict__)

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_HEADER)]
        for row in self.rows:
            lines.append(",".join("" if row[k] is None else repr(row[k]) for k in self.CSV_HEADER))
        return "\n".join(lines) + "\n"


def moser_trace(f, p: float, constants: BoundConstants, levels: int) -> MoserTrace:
    """Norms of ``f`` along the ladder and the constant each step implies.

    ``variation`` is ``max/min - 1`` over the implied constants.
    """
    field_ = getattr(f, "u", f)
    if p < 2:
        raise HypothesisError(f"p = {p:g}: {LADDER_REJECTION}")
    if levels < 1:
        raise ConfigurationError("the ladder needs at least one level")
    if np.min(field_.values) < 0:
        raise HypothesisError("the ladder runs on a signed part, which must be non-negative")
    n, alpha, calpha = constants.n, constants.alpha, constants.calpha
    taus = ladder_exponents(n, p, levels)
    norms = [lp_norm(field_, t) for t in taus]
    if norms[0] == 0.0:
        raise HypothesisError("the field vanishes, so the ladder is empty")
    rows = []
    for i, tau in enumerate(taus):
        row = {"i": i, "tau": float(tau), "norm": norms[i],
               "step_ratio": None, "step_bound": None, "implied": None}
        if i < levels:
            ratio = norms[i + 1] / norms[i]
            bound = step_bound(tau, alpha, calpha)
            row.update(step_ratio=ratio, step_bound=bound, implied=ratio / bound)
        rows.append(row)
    implied = [row["implied"] for row in rows[:-1]]
    return MoserTrace(
        p=float(p), omega=_omega(n), rows=rows,
        max_implied=float(max(implied)), variation=float(max(implied) / min(implied) - 1.0),
        bound_product=ladder_product(n, p, alpha, calpha, levels),
        closed_form=ladder_closed_form(n, p, alpha, calpha),
        paper_factor=growth_factor(n, p, alpha, calpha),
        exponent_sum=exponent_partial_sum(n, p, levels),
    )


# -- two-dimensional reverse Schwarz check ------------------------------------

@dataclass
class PayneRaynerRecord:
    shape: str
    ratio_sq: float
    bound: float
    gap: float
    lam: float
    h: float

    def to_dict(self):
        return dict(self.__dict__)


def payne_rayner_check(grid, mask, config: SolverConfig = SolverConfig()) -> PayneRaynerRecord:
    """``(||u||_2/||u||_1)^2`` against ``lambda_1/(4 pi)``; gap = ``1 - ratio^2 / bound``."""
    if grid.dimension != 2:
        raise HypothesisError("the reverse Schwarz inequality is two-dimensional")
    op = assemble(grid, mask, CoefficientField.identity(2))
    pair = smallest_eigenpairs(op, 1, config)[0]
    ratio_sq = (lp_norm(pair.u, 2) / lp_norm(pair.u, 1)) ** 2
    bound = pair.lam / (4.0 * math.pi)
    return PayneRaynerRecord(mask.shape.kind, ratio_sq, bound, 1.0 - ratio_sq / bound,
                             pair.lam, float(grid.spacing.max()))


def disk_domain(h: float, radius: float = 1.0):
    """Grid with a two-cell margin around the disk of ``radius`` centred at 0."""
    nodes = int(round(2 * (radius + 2 * h) / h)) + 1
    grid = build_grid(2, (nodes - 1) * h, nodes, origin=-radius - 2 * h)
    return grid, build_domain(grid, Ball((0.0, 0.0), radius))


def square_domain(h: float, side: float = 1.0):
    nodes = int(round(side / h)) + 1
    grid = build_grid(2, side, nodes)
    return grid, build_domain(grid, "box")
