import math

import numpy as np
import pytest

from kmcert.certify import (APPX, CLAIMS, Interval, check, condition3_chain, certify_condition3, enclose_g,
                            enclose_m_at, enclose_p4, enclose_r4, g_hat, identities, lambda_star, lambda_zhat_chain,
                            m_inverse, m_theta_lambda, r2_bracket, run_all, spectral_setup, vartheta, z_star)
from kmcert.gaussenc import quad_gauss
from kmcert.specfun import calE, calE_derivs
from kmcert.threshold import KAPPA0, P, contraction_factor, fixed_point

# mpmath oracles (50 digits)
Z0 = -0.66931574792594585026
LAMBDA0 = -0.19099663495930506128
M_ZHAT = 0.93096949062199446746

MC = KAPPA0
Q0 = MC.q_bracket.mid
GAMMA0 = Q0 / (1.0 - Q0)
SG = math.sqrt(GAMMA0)


@pytest.fixture(scope="module")
def p4():
    return enclose_p4()


@pytest.fixture(scope="module")
def r4():
    return enclose_r4()


@pytest.fixture(scope="module")
def ids(p4, r4):
    return identities(MC.q_bracket, p4, r2_bracket(), r4, MC.gamma_bracket)


def _E(z):
    return calE(SG * z)


def _E1(z):
    return calE_derivs(SG * z, 1)


def test_p4_inside_bracket(p4):
    assert APPX.p4_bracket.contains(p4)
    assert p4.width < 1e-9


def test_r4_inside_bracket_and_above_r2_squared(r4):
    assert APPX.r4_bracket.contains(r4)
    assert r4.lo >= r2_bracket().sqr().lo
    assert r4.contains(quad_gauss(lambda z: _E(z) ** 4))


def test_m_at_zhat():
    m = enclose_m_at(APPX.z_hat)
    assert m.hi <= APPX.m_ub.hi
    assert abs(m.mid - M_ZHAT) < 2e-9


def test_m_at_zero_is_one_minus_q():
    # E sech^2 = 1 - E th^2
    m = enclose_m_at(0.0)
    assert m.overlaps(Interval(1.0 - MC.q_bracket.hi, 1.0 - MC.q_bracket.lo))
    assert m.contains(1.0 - P(MC.psi_bracket.mid))


def test_m_decreasing():
    vals = [enclose_m_at(z) for z in (-0.8, -0.669316, -0.3, 0.0, 1.0)]
    for a, b in zip(vals, vals[1:]):
        assert a.lo > b.hi


def test_g_lower_bound():
    g = enclose_g()
    assert g.lo >= APPX.g_lb.lo
    mid = quad_gauss(lambda z: g_hat(_E1(z), M_ZHAT, Q0))
    assert g.lo <= mid


def test_g_hat_monotone():
    e = np.linspace(0.05, 0.95, 19)
    vals = g_hat(e, 0.93, Q0)
    assert np.all(vals > 0) and np.all(np.diff(vals) > 0)
    assert g_hat(0.5, 0.9, Q0) > g_hat(0.5, 0.95, Q0)


def test_identity_s1_matches_d0(ids):
    assert (ids["s1"] * MC.alpha_bracket / (1.0 - MC.q_bracket)).overlaps(-MC.d0_bracket)


@pytest.mark.parametrize("name,integrand", [
    ("s1", lambda z: _E1(z)),
    ("s2", lambda z: _E(z) ** 2 * _E1(z)),
    ("s3", lambda z: SG * z * _E(z) * _E1(z)),
    ("s4", lambda z: (SG * z) ** 2 * _E1(z)),
    ("s5", lambda z: _E1(z) ** 2),
])
def test_identities_against_quadrature(ids, name, integrand):
    assert ids[name].contains(quad_gauss(integrand))


def test_identity_t(ids):
    assert abs(ids["t"].mid - 0.31269207) < 1e-8


def test_condition3_chain(ids):
    val = condition3_chain()
    assert val.hi <= APPX.a_ub.hi < 1.0
    # the chain bounds alpha t s5 / (1 - q0)^2, which is the double-precision contraction factor
    direct = MC.alpha_bracket * ids["t"] * ids["s5"] / (1.0 - MC.q_bracket).sqr()
    a = MC.alpha_bracket.mid
    q, psi = fixed_point(a)
    assert direct.contains(contraction_factor(a, q, psi))
    assert direct.hi <= val.hi
    assert certify_condition3().passed
    assert not certify_condition3(a_ub=Interval.point(0.54)).passed


def test_lambda_zhat_chain():
    assert lambda_zhat_chain().hi <= APPX.lambda_ub.hi
    assert lambda_star() <= lambda_zhat_chain().hi


def test_z_star_and_lambda_star_oracles():
    assert abs(z_star() - Z0) < 1e-9
    assert abs(lambda_star() - LAMBDA0) < 1e-9
    assert abs(m_theta_lambda(APPX.z_hat.mid)["m"] - M_ZHAT) < 1e-9


def test_theta_decreasing_lambda_convex():
    zs = np.linspace(-0.9, 3.0, 40)
    out = [m_theta_lambda(z) for z in zs]
    theta = np.array([o["theta"] for o in out])
    lam = np.array([o["lambda"] for o in out])
    assert np.all(np.diff(theta) < 0)
    assert np.all(np.diff(lam, 2) > -1e-12)
    assert m_theta_lambda(100.0)["lambda"] > 0


def test_dm_matches_finite_difference():
    h = 1e-5
    z = -0.3
    fd = (m_theta_lambda(z + h)["m"] - m_theta_lambda(z - h)["m"]) / (2 * h)
    assert abs(fd - m_theta_lambda(z)["dm"]) < 1e-8


def test_lambda_eps_converges():
    lams = [lambda_star(e) for e in (0.05, 0.01, 0.001)]
    gaps = [abs(x - LAMBDA0) for x in lams]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 0.02


def test_m_inverse_and_vartheta():
    S = spectral_setup(0.0)
    z = m_inverse(0.7, S)
    assert abs(m_theta_lambda(z, setup=S)["m"] - 0.7) < 1e-12
    t = m_theta_lambda(Z0, setup=S)["m"]
    assert abs(vartheta(t, Z0, S) - (LAMBDA0 + S.d)) < 1e-9


def test_check_relations():
    a = Interval(1.0, 2.0)
    assert check("x", a, Interval(0.0, 3.0), "subset").passed
    assert check("x", a, Interval(0.0, 2.0), "leq").passed
    assert not check("x", a, Interval(1.5, 9.0), "geq").passed
    with pytest.raises(ValueError):
        check("x", a, a, "approx")


def test_run_all_passes():
    cert = run_all()
    assert cert.passed, [r.claim_id for r in cert.failures()]
    ids_ = {r.claim_id.split("_")[0] for r in cert.records}
    assert {"p4", "r4", "m", "g", "condition3", "lambda", "C", "I", "M"} <= ids_
    doc = cert.to_json()
    assert all(r["wall_ms"] >= 0 for r in doc["records"])


def test_run_all_subset_and_failure():
    cert = run_all(claims=("p4", "condition3"), a_ub=Interval.point(0.54))
    assert [r.claim_id for r in cert.records] == ["p4", "condition3"]
    assert not cert.passed and cert["condition3"].relation == "leq"
    with pytest.raises(ValueError):
        run_all(kappa=0.5)
    assert set(CLAIMS) >= {"p4", "r4"}
