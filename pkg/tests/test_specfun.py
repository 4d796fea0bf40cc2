import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmcert.interval import DomainError, IArray, Interval
from kmcert.specfun import (CalEEnclosureCfg, EpsParams, F_eps_rho, F_eps_rho_deriv, F_oneminusq,
                            F_oneminusq_deriv, Fp_bounds, Psi, calE, calE_derivs, fdot_eps, fhat_eps,
                            hf0, hf0_via_F, logPsi, phi, th_eps, th_eps_inv, RIEMANN_CFG)

Q0 = 0.563949079895        # midpoint of the reference q bracket
# 50-digit oracles (mpmath: phi/Psi with Psi = erfc(x/sqrt2)/2)
CALE_3 = 3.283098654930436506928092
HF0_AT_0 = 4.017738096876956849516174   # E'(0)/((1-q)(1-E'(0))) at q = Q0

xs = st.floats(min_value=-20.0, max_value=10.0, allow_nan=False)


def test_gaussian_basics():
    assert Psi(0.0) == 0.5
    assert phi(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert 0.5 in Psi(Interval.point(0.0))
    assert 1 / math.sqrt(2 * math.pi) in phi(Interval.point(0.0))


def test_Psi_far_tail():
    v = Psi(10.0)
    assert 0 < v < 2e-23
    assert v == pytest.approx(7.61985302416052606597e-24, rel=1e-12)


def test_calE_at_zero_interval():
    e = calE(Interval.point(0.0))
    assert math.sqrt(2 / math.pi) in e
    assert e.width < 1e-12


def test_calE_at_three_against_oracle():
    e = calE(Interval.point(3.0))
    assert e.lo <= CALE_3 <= e.hi
    assert e.width <= 1e-4
    assert calE(3.0) == pytest.approx(CALE_3, rel=1e-14)


def test_calE_riemann_route_agrees():
    # the monotone Riemann-sum route must contain the value too, only wider
    for x in (-3.0, 0.0, 0.4, 3.0, 9.5):
        a = calE(Interval.point(x), RIEMANN_CFG)
        b = calE(Interval.point(x))
        assert a.contains(float(calE(x))) and b.contains(float(calE(x)))
        assert a.overlaps(b)


def test_calE_interval_domain():
    with pytest.raises(DomainError):
        calE(Interval(9.0, 10.5))


def test_cfg_validation():
    with pytest.raises(ValueError):
        CalEEnclosureCfg(L_plus=11)
    with pytest.raises(ValueError):
        CalEEnclosureCfg(sub_mesh=0.02)


@settings(max_examples=200, deadline=None)
@given(xs)
def test_calE_bounds(x):
    v = float(calE(x))
    assert 0 <= v <= abs(x) + 1


def test_calE_derivs_at_zero():
    assert float(calE_derivs(0.0, 1)) == pytest.approx(2 / math.pi, rel=1e-14)
    assert 2 / math.pi in calE_derivs(Interval.point(0.0), 1)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-20.0, max_value=8.0))
def test_calE_derivs_unit_range(x):
    assert 0 < float(calE_derivs(x, 1)) < 1
    assert 0 < float(calE_derivs(x, 2)) < 1


def test_third_derivative_range_by_differences():
    x = np.linspace(-15, 8, 2001)
    h = 1e-4
    d3 = (calE_derivs(x + h, 2) - calE_derivs(x - h, 2)) / (2 * h)
    assert d3.min() > -0.5 - 1e-6 and d3.max() < 13 + 1e-6
    assert np.allclose(d3, calE_derivs(x, 3), atol=1e-6)


def _d5(f, x, h=1e-3):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def test_derivatives_match_differences():
    x = np.linspace(-8, 6, 301)
    for k, parent in ((1, calE), (2, lambda t: calE_derivs(t, 1)), (3, lambda t: calE_derivs(t, 2))):
        assert np.allclose(_d5(parent, x), calE_derivs(x, k), rtol=1e-6, atol=1e-10)
    assert np.allclose(_d5(lambda t: F_oneminusq(t, Q0), x), F_oneminusq_deriv(x, Q0), rtol=1e-6, atol=1e-10)
    p = EpsParams(0.05, 0.56)
    parents = {1: lambda t: F_eps_rho(t, p), 2: lambda t: F_eps_rho_deriv(t, p, order=1),
               3: lambda t: F_eps_rho_deriv(t, p, order=2)}
    for k, parent in parents.items():
        assert np.allclose(_d5(parent, x), F_eps_rho_deriv(x, p, order=k), rtol=1e-6, atol=1e-10)


def test_interval_double_consistency():
    for x in np.linspace(-12, 9.5, 57):
        X = Interval.point(float(x))
        h = 0.4 * float(x)
        assert calE(X).contains(float(calE(x)))
        assert calE_derivs(X, 1).contains(float(calE_derivs(x, 1)))
        assert calE_derivs(X, 2).contains(float(calE_derivs(x, 2)))
        assert Psi(X).contains(float(Psi(x)))
        assert logPsi(X).contains(float(logPsi(x)))
        H = Interval.point(h)
        assert F_oneminusq(H, Q0).contains(float(F_oneminusq(h, Q0)))


def test_calE_interval_on_wide_cell_is_hull():
    cell = calE(Interval(-1.0, 0.5))
    assert cell.contains(float(calE(-1.0))) and cell.contains(float(calE(0.5)))


def test_F_oneminusq_collapses_at_kappa():
    for kappa in (0.0, 0.7):
        v = float(F_oneminusq(kappa, 0.3, kappa))
        assert v == pytest.approx(float(calE(0.0)) / math.sqrt(0.7), rel=1e-14)


def test_F_oneminusq_rejects_q_one():
    with pytest.raises(DomainError):
        F_oneminusq(0.0, 1.0)


def test_F_derivative_identity_kappa0():
    # differentiating E(-x/s)/s gives F' = -F (F + x/(1-q)); with the minus sign
    # inside the bracket F' would turn positive for large x
    x = np.linspace(-6, 6, 101)
    F = F_oneminusq(x, Q0)
    assert np.allclose(F_oneminusq_deriv(x, Q0), -F * (F + x / (1 - Q0)), rtol=1e-10, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-15, max_value=8), st.floats(min_value=0.0, max_value=0.95))
def test_F_decreasing_and_damped(x, q):
    fp = float(F_oneminusq_deriv(x, q))
    assert fp < 0 and 1 + (1 - q) * fp > 0


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-15, max_value=15))
def test_hf0_positive_and_two_forms(x):
    a = float(hf0(x, Q0))
    assert a > 0
    assert a == pytest.approx(float(hf0_via_F(x, Q0)), rel=1e-10, abs=1e-12)


def test_hf0_at_zero_against_oracle():
    assert float(hf0(0.0, Q0)) == pytest.approx(HF0_AT_0, rel=1e-13)
    assert hf0(Interval.point(0.0), Interval.point(Q0)).contains(HF0_AT_0)


def test_th_eps():
    assert th_eps(0.0, 0.3) == 0.0
    x = np.linspace(-5, 5, 41)
    assert np.allclose(th_eps_inv(th_eps(x, 0.05), 0.05), x, atol=1e-12)


eps_st = st.floats(min_value=0.0, max_value=0.5)
rho_st = st.floats(min_value=0.1, max_value=10.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-20, max_value=20), eps_st, rho_st)
def test_F_eps_rho_derivative_bounds(x, eps, rho):
    p = EpsParams(eps, rho)
    lo, hi = Fp_bounds(p)
    d = float(F_eps_rho_deriv(x, p))
    tol = 1e-12 * (1 + abs(lo))
    assert lo - tol <= d <= hi + tol
    assert 1 + rho * d >= eps / (rho + eps * (1 + eps * rho)) - 1e-12


def test_F_eps_rho_limit():
    # the gap is first order in eps (about 2e-3 at x = -5, eps = 1e-4), so check the rate
    q = 0.5
    x = np.linspace(-5, 5, 51)
    gaps = [np.abs(F_eps_rho(x, EpsParams(e, 1 - q)) - F_oneminusq(x, q)) for e in (1e-4, 1e-6, 1e-8)]
    assert gaps[0].max() <= 25 * 1e-4
    assert gaps[2].max() <= 25 * 1e-8
    assert gaps[1].max() / gaps[0].max() == pytest.approx(1e-2, rel=0.05)


def test_fdot_eps():
    assert float(fdot_eps(0.0, 0.2)) == pytest.approx(1 / 1.2, rel=1e-15)
    assert float(fdot_eps(0.0, 0.0)) == 1.0
    x = np.linspace(-30, 30, 601)
    assert (fdot_eps(x, 0.2) >= 1 / 1.2 - 1e-15).all()


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-20, max_value=20), st.floats(min_value=1e-4, max_value=0.5), rho_st)
def test_fhat_eps_positive(x, eps, rho):
    assert float(fhat_eps(x, EpsParams(eps, rho))) > 0


def test_eps_params_validation():
    with pytest.raises(ValueError):
        EpsParams(0.6, 1.0)
    with pytest.raises(ValueError):
        EpsParams(0.1, 0.05)


def test_vectorised_interval_calE():
    pts = np.linspace(-5, 5, 11)
    enc = calE(IArray(pts))
    assert enc.contains(calE(pts)).all()
