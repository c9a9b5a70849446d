"""Numerical lab for reverse Hölder inequalities of Dirichlet eigenfunctions
of ``-d_j(a_ij d_i u) + V u`` on boxes and balls."""

__version__ = "0.1.0"

from .calibration import CnEstimate, TestBank, estimate_cn, fp_ratio, gns_ratio, make_test_bank
from .eigensolver import EigenPair, SolverConfig, smallest_eigenpairs, solve_linear
from .errors import (
    ConfigurationError, DegenerateInputError, HypothesisError, RHLabError, SolverError,
)
from .mesh import Ball, Box, DomainMask, Grid, avoid_singularities, build_domain, build_grid
from .norms import h1_seminorm, lp_norm, signed_parts
from .operator import CoefficientField, SparseOperator, assemble, ellipticity_constant
from .potentials import (
    BallWell, Constant, MCParams, PowerLaw, ScalarField, Sum, mc_norm, mc_norm_analytic,
    sample_potential,
)
from .rhi import (
    BoundConstants, MoserTrace, RHIReport, c_alpha, growth_factor, moser_trace,
    payne_rayner_check, verify_rhi,
)
