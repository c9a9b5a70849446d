import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhlab.eigensolver import smallest_eigenpairs
from rhlab.errors import ConfigurationError, HypothesisError
from rhlab.norms import lp_norm, signed_parts
from rhlab.operator import CoefficientField, assemble
from rhlab.rhi import (
    BoundConstants, c_alpha, disk_domain, exponent_partial_sum, growth_factor,
    ladder_closed_form, ladder_exponents, ladder_product, moser_trace, payne_rayner_check,
    square_domain, verify_rhi,
)

from conftest import sine_product


@pytest.fixture(scope="module")
def ground(cube16):
    g, m = cube16
    return smallest_eigenpairs(assemble(g, m, CoefficientField.identity(3)), 1)[0]


def constants(calpha_inputs=(1.0, 0.0), alpha=1.0):
    cn, mc = calpha_inputs
    return BoundConstants(3, 1.0, 29.6, alpha, 2.5, cn, mc)


def test_c_alpha_formula():
    assert c_alpha(1.0, 1.0, 1.0, 0.0) == 1.0
    assert c_alpha(1.0, 0.5, 1.0, 1.0) == 2.0
    assert c_alpha(1.0, 1.0, 1.0, 2 * math.sqrt(math.pi)) == pytest.approx(1 + 16 * math.pi)
    with pytest.raises(HypothesisError):
        c_alpha(2.0, 1.0, 1.0, 1.0)
    with pytest.raises(HypothesisError):
        c_alpha(1.0, 1.0, 0.0, 1.0)


def test_growth_factor_formula():
    assert growth_factor(3, 2, 1, 1) == pytest.approx(2 ** 1.5 * 3 ** 1.5)
    assert growth_factor(3, 1, 1, 2) == pytest.approx(2 ** 1.5 * 2 ** 3 * 3 ** 3)
    assert growth_factor(3, 1, 1, 2) == pytest.approx(610.94, abs=0.01)
    # exponents scale like 1/p, so the factor falls with p beyond 2
    assert growth_factor(3, 2, 1, 5) > growth_factor(3, 3, 1, 5) > growth_factor(3, 8, 1, 5)
    assert growth_factor(3, 2, 1, 5) < growth_factor(3, 2, 1, 6)
    assert growth_factor(3, 2, 1.9, 5) > growth_factor(3, 2, 1.0, 5)
    assert growth_factor(3, 2, 1, 1, telescoped=True) == pytest.approx(2 ** 1.5 * 3 ** 0.75)
    with pytest.raises(HypothesisError):
        growth_factor(2, 2, 1, 1)


def test_bound_constants_invariants():
    k = BoundConstants(3, 2.0, 1.0, 1.0, 2.5, 1.0, 1.0)
    assert k.calpha == c_alpha(1.0, 1.0, 2.0, 1.0) >= 1
    with pytest.raises(HypothesisError):
        BoundConstants(3, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0)  # r = 2/alpha
    with pytest.raises(HypothesisError):
        BoundConstants(3, 0.0, 1.0, 1.0, 2.5, 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        BoundConstants(3, 1.0, 1.0, 1.0, 2.5, 1.0, 1.0, calpha=1.5)


def test_verify_rhi_cube(ground):
    rep = verify_rhi(ground, constants(), [(1, 2), (2, 2), (2, 1), (0.5, math.inf)])
    r12, r22, bad, rinf = rep.rows
    assert r12.ratio == pytest.approx((0.5 ** 1.5) / (2 / math.pi) ** 3, rel=0.01)
    assert r12.fitted_C == pytest.approx(r12.ratio / growth_factor(3, 1, 1.0, 1.0))
    assert r22.ratio == 1.0 and r22.fitted_C <= 1
    assert bad.error and bad.ratio is None
    assert math.isfinite(rinf.ratio)
    assert rep.max_fitted_C == max(r.fitted_C for r in rep.valid_rows)
    # the ground state is positive, so g vanishes
    assert [row.error == "field vanishes" for row in rep.parts["g"]] == [True, True, False, True]
    assert [r.ratio for r in rep.parts["f"]] == [r.ratio for r in rep.rows]
    csv = rep.to_csv().splitlines()
    assert csv[0] == "p,q,norm_p,norm_q,ratio,factor,fitted_C"
    assert len(csv) == 4 and csv[-1].startswith("0.5,inf,")


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_verify_rhi_homogeneous(ground, c):
    qs = [(p, q) for p in (0.5, 1, 2, 3) for q in (2, 4, 8, math.inf) if q >= p]
    a = verify_rhi(ground, constants(), qs)
    b = verify_rhi(ground.u * c, constants(), qs)
    for x, y in zip(a.rows, b.rows):
        assert y.ratio == pytest.approx(x.ratio, rel=1e-12)
        assert y.fitted_C == pytest.approx(x.fitted_C, rel=1e-12)


def test_decomposition_rows(cube16):
    g, m = cube16
    pairs = smallest_eigenpairs(assemble(g, m, CoefficientField.identity(3)), 2)
    second = pairs[1]
    rep = verify_rhi(second, constants(), [(1, 2), (2, 4)])
    f, h = signed_parts(second.u)
    for q in (2.0, 4.0):
        assert lp_norm(second.u, q) ** q == pytest.approx(lp_norm(f, q) ** q + lp_norm(h, q) ** q,
                                                          rel=1e-12)
    assert all(r.error is None for r in rep.parts["f"] + rep.parts["g"])


def test_verify_rhi_worker_independent(ground):
    qs = [(0.5, 2), (1, 4), (2, 8), (3, math.inf)]
    a = verify_rhi(ground, constants(), qs, workers=1).to_dict()
    b = verify_rhi(ground, constants(), qs, workers=4).to_dict()
    assert a == b


def test_ladder_bookkeeping():
    assert ladder_exponents(3, 2, 3).tolist() == [2, 6, 18, 54]
    assert abs(exponent_partial_sum(3, 2, 20) - 0.75) < 1e-6
    for n, p, alpha, ca in ((3, 2, 1.0, 1.0), (3, 3, 1.5, 4.0), (4, 2, 0.5, 2.0)):
        assert ladder_product(n, p, alpha, ca, 21) == pytest.approx(
            ladder_closed_form(n, p, alpha, ca), rel=1e-4)
    # the closed form carries half the omega exponent written into the growth factor
    n, p, alpha = 3, 2, 1.0
    assert ladder_closed_form(n, p, alpha, 1.0) == pytest.approx(
        growth_factor(n, p, alpha, 1.0, telescoped=True))


def test_moser_trace_cube(ground):
    f, _ = signed_parts(ground.u)
    trace = moser_trace(f, 2.0, constants(), 6)
    assert [r["tau"] for r in trace.rows] == [2, 6, 18, 54, 162, 486, 1458]
    implied = [r["implied"] for r in trace.rows[:-1]]
    assert all(np.isfinite(implied))
    assert trace.variation <= 0.5
    assert trace.max_implied == max(implied)
    assert trace.to_csv().splitlines()[-1].endswith(",,,")


def test_moser_rejections(ground):
    with pytest.raises(HypothesisError, match="max\\{p, 2\\}"):
        moser_trace(ground.u, 1.0, constants(), 6)
    with pytest.raises(ConfigurationError):
        moser_trace(ground.u, 2.0, constants(), 0)
    with pytest.raises(HypothesisError):
        moser_trace(-ground.u, 2.0, constants(), 3)


def test_payne_rayner_disk_and_scaling():
    rec = payne_rayner_check(*disk_domain(1 / 64))
    assert abs(rec.gap) < 0.02
    big = payne_rayner_check(*disk_domain(2 / 64, radius=2.0))
    # dilation by 2 maps the grid onto itself, so both sides agree closely
    assert big.ratio_sq / big.bound == pytest.approx(rec.ratio_sq / rec.bound, rel=1e-10)


def test_payne_rayner_square_is_strict():
    rec = payne_rayner_check(*square_domain(1 / 64))
    assert rec.ratio_sq < rec.bound
    # continuum values pi^4/64 and pi/2
    assert rec.ratio_sq == pytest.approx(math.pi ** 4 / 64, rel=1e-3)
    assert rec.bound == pytest.approx(math.pi / 2, rel=1e-3)


def test_payne_rayner_requires_2d(cube16):
    with pytest.raises(HypothesisError):
        payne_rayner_check(*cube16)
