"""Rigorous enclosures behind the kappa = 0 capacity bound, and the spectral scalar functions.

Every certified number is an ``Interval``; ``run_all`` gathers them into a
``Certificate`` whose records state the target and the relation checked.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from . import interval as iv
from .gaussenc import GridSpec, MonotoneSpec, NonConvergence, enclose_gauss_expectation, enclose_gauss_taylor, tail_bound
from .interval import DomainError, Interval, IArray
from .specfun import EpsParams, calE, calE_derivs, calE_points, fdot_eps, fhat_eps, hf0
from .threshold import KAPPA0, ModelConstants, EpsFixedPoint, fixed_point, perturbed_fixed_point, _E


class CertificationFailure(AssertionError):
    pass


def _dec(s: str) -> Interval:
    return Interval.from_decimal(s)


@dataclass(frozen=True)
class ReferenceConstants:
    z_hat: Interval = field(default_factory=lambda: _dec("-0.669316"))
    p4_bracket: Interval = field(default_factory=lambda: Interval.hull_of(_dec("0.4405902310"), _dec("0.4405902320")))
    r4_bracket: Interval = field(default_factory=lambda: Interval.hull_of(_dec("5.297"), _dec("5.317")))
    m_ub: Interval = field(default_factory=lambda: _dec("0.9309695"))
    g_lb: Interval = field(default_factory=lambda: _dec("0.7739"))
    a_ub: Interval = field(default_factory=lambda: _dec("0.5446"))
    lambda_ub: Interval = field(default_factory=lambda: _dec("-0.1906"))


APPX = ReferenceConstants()


# ---------------------------------------------------------------------------
# certificate records
# ---------------------------------------------------------------------------

RELATIONS = ("subset", "leq", "geq")


@dataclass
class Record:
    claim_id: str
    computed: Interval
    target: Interval
    relation: str
    passed: bool
    wall_time: float = 0.0
    note: str = ""

    def to_json(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "computed_lo": self.computed.lo,
            "computed_hi": self.computed.hi,
            "target": {"lo": self.target.lo, "hi": self.target.hi},
            "relation": self.relation,
            "pass": self.passed,
            "wall_ms": round(1000.0 * self.wall_time, 3),
            "note": self.note,
        }


def check(claim_id: str, computed: Interval, target: Interval, relation: str, wall: float = 0.0, note: str = "") -> Record:
    """leq: computed.hi <= target.hi; geq: computed.lo >= target.lo; subset: containment."""
    if relation == "subset":
        ok = target.contains(computed)
    elif relation == "leq":
        ok = computed.hi <= target.hi
    elif relation == "geq":
        ok = computed.lo >= target.lo
    else:
        raise ValueError(relation)
    return Record(claim_id, computed, target, relation, bool(ok), wall, note)


@dataclass
class Certificate:
    records: list[Record] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[Record]:
        return [r for r in self.records if not r.passed]

    def __getitem__(self, claim_id: str) -> Record:
        for r in self.records:
            if r.claim_id == claim_id:
                return r
        raise KeyError(claim_id)

    def to_json(self) -> dict:
        return {"meta": self.meta, "records": [r.to_json() for r in self.records]}


# ---------------------------------------------------------------------------
# the four integral claims
# ---------------------------------------------------------------------------

TAYLOR_CELL = 2.0**-4
TAYLOR_ORDER = 12


def _p4_at(psi: Interval, L: float = 10.0) -> Interval:
    s = psi.sqrt()
    T = tail_bound("bounded_by_one", L, 1.0, {"B": 1.0})
    return enclose_gauss_taylor(lambda x: (x * s).tanh().sqr().sqr(), L=L, cell=TAYLOR_CELL,
                                order=TAYLOR_ORDER, tail=Interval(0.0, T.hi))


def enclose_p4(mc: ModelConstants = KAPPA0) -> Interval:
    """p4 = E th^4(sqrt(psi0) Z), sandwiched by the values at the psi endpoints (p4 increases in psi)."""
    lo = _p4_at(mc.lb("psi"))
    hi = _p4_at(mc.ub("psi"))
    return Interval(lo.lo, hi.hi)


def r4_grid(delta: float = 1e-3, L: float = 8.0) -> GridSpec:
    return GridSpec(L, delta, "cauchy_schwarz_poly")


def enclose_r4(mc: ModelConstants = KAPPA0, grid: GridSpec | None = None) -> Interval:
    """r4 = E E(sqrt(gamma0) Z)^4 by monotone cell sums over the whole gamma bracket.

    E^4 is increasing and nonnegative; the tail uses Cauchy-Schwarz with
    E(x) <= |x| + 1.
    """
    grid = grid or r4_grid()
    spec = MonotoneSpec("increasing", nonnegative=True, tail={"p": 4})
    return enclose_gauss_expectation(lambda a: calE(a).sqr().sqr(), mc.gamma_bracket, grid, spec)


def _m_series(z: Interval, psi: Interval):
    s = psi.sqrt()

    def f(x):
        c = (x * s).cosh()
        return (c.sqr() + z).recip()

    return f


def _m_at_psi(z: Interval, psi: Interval, L: float = 10.0) -> Interval:
    if z.lo <= -1.0:
        raise DomainError("m(z) needs z > -1")
    bound = 1.0 / (1.0 + z)
    T = tail_bound("bounded_by_one", L, 1.0, {"B": 1.0}) * bound
    return enclose_gauss_taylor(_m_series(z, psi), L=L, cell=TAYLOR_CELL, order=TAYLOR_ORDER,
                                tail=Interval(0.0, T.hi))


def enclose_m_at(z, mc: ModelConstants = KAPPA0) -> Interval:
    """m(z) = E (z + ch^2(sqrt(psi0) Z))^{-1}, decreasing in psi: upper value at psi_lb, lower at psi_ub."""
    z = iv.to_interval(z)
    hi = _m_at_psi(z, mc.lb("psi"))
    lo = _m_at_psi(z, mc.ub("psi"))
    return Interval(lo.lo, hi.hi)


def g_hat(e1, m, q):
    """E'/((1-q)(1-E') + m E') written to use E' once, so it is monotone in E'."""
    return 1.0 / ((1.0 - q) * (1.0 / e1 - 1.0) + m)


def enclose_g(mc: ModelConstants = KAPPA0, m_ub: Interval | None = None, grid: GridSpec | None = None,
              deriv_bound: float = 20.0) -> Interval:
    """Enclosure whose lower end bounds g(m(z_hat), q0, gamma0) from below.

    g is decreasing in m and increasing in q, so m_ub and q_lb are used.  The
    gamma dependence is handled with |d/dgamma g| <= 20 from gamma_lb.
    """
    m = m_ub if m_ub is not None else APPX.m_ub
    q = mc.lb("q")
    grid = grid or GridSpec(8.0, 1e-3, "bounded_by_one")
    B = (1.0 / (1.0 - q)).hi
    spec = MonotoneSpec("increasing", nonnegative=True, tail={"B": B})

    def f(a):
        return g_hat(calE_derivs(a, 1), m, q)

    gl = Interval.point(mc.gamma_bracket.lo)
    cell = enclose_gauss_expectation(f, gl, grid, spec)
    slack = deriv_bound * (Interval.point(mc.gamma_bracket.hi) - gl)
    return Interval((cell - slack).lo, cell.hi + slack.hi)


# ---------------------------------------------------------------------------
# identities and the two condition chains
# ---------------------------------------------------------------------------

def identities(p2: Interval, p4: Interval, r2: Interval, r4: Interval, gamma: Interval) -> dict[str, Interval]:
    g = gamma
    one = Interval.point(1.0)
    g1, g2, g3 = one + g, one + 2.0 * g, one + 3.0 * g
    return {
        "t": one - 2.0 * p2 + p4,
        "s1": r2 / g1,
        "s2": r4 / g3,
        "s3": -(g / g2) * r2 + (3.0 * g / (g2 * g3)) * r4,
        "s4": -(g * (4.0 * g.sqr() + g - 1.0) / (g1.sqr() * g2)) * r2 + (6.0 * g.sqr() / (g1 * g2 * g3)) * r4,
        "s5": (g / g2) * r2 + ((one - g) / (g2 * g3)) * r4,
    }


def r2_bracket(mc: ModelConstants = KAPPA0) -> Interval:
    """r2(gamma0) = (1-q0) psi0 / alpha*."""
    return (1.0 - mc.q_bracket) * mc.psi_bracket / mc.alpha_bracket


def condition3_chain(mc: ModelConstants = KAPPA0, p4_ub: Interval | None = None, r4_lb: Interval | None = None) -> Interval:
    """(1 - 2 q_lb + p4_ub)(gamma_ub psi_ub/(1+q_lb) + alpha_lb (1-gamma_lb) r4_lb / ((1+q_ub)(1+2 q_ub)))."""
    p4u = p4_ub if p4_ub is not None else Interval.point(APPX.p4_bracket.hi)
    r4l = r4_lb if r4_lb is not None else Interval.point(APPX.r4_bracket.lo)
    ql, qu = mc.lb("q"), mc.ub("q")
    gl, gu = Interval.point(mc.gamma_bracket.lo), Interval.point(mc.gamma_bracket.hi)
    first = 1.0 - 2.0 * ql + p4u
    second = gu * mc.ub("psi") / (1.0 + ql) + mc.lb("alpha") * (1.0 - gl) / ((1.0 + qu) * (1.0 + 2.0 * qu)) * r4l
    return first * second


def certify_condition3(mc: ModelConstants = KAPPA0, a_ub: Interval | None = None) -> Record:
    a = a_ub if a_ub is not None else APPX.a_ub
    t0 = time.perf_counter()
    val = condition3_chain(mc)
    rec = check("condition3", val, Interval(-1e300, a.hi), "leq", time.perf_counter() - t0)
    return rec


def lambda_zhat_chain(mc: ModelConstants = KAPPA0, g_lb: Interval | None = None) -> Interval:
    """z_hat - alpha_lb g_lb + (1 - q_lb) psi_ub."""
    g = g_lb if g_lb is not None else APPX.g_lb
    return APPX.z_hat - mc.lb("alpha") * g + (1.0 - mc.lb("q")) * mc.ub("psi")


# ---------------------------------------------------------------------------
# spectral scalar functions (double precision)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralSetup:
    """Data entering m_eps, theta_eps, lambda_eps (eps = 0 is the unperturbed model)."""

    eps: float
    alpha: float
    q_t: float     # q_eps + eps
    psi_t: float   # psi_eps + eps
    rho: float
    d: float
    kappa: float = 0.0

    def fdot(self, x):
        if self.eps == 0.0:
            return np.cosh(np.minimum(np.abs(x), 350.0)) ** 2
        return fdot_eps(x, self.eps)

    def fhat(self, x):
        if self.eps == 0.0:
            return hf0(x, 1.0 - self.rho, self.kappa)
        return fhat_eps(x, EpsParams(self.eps, self.rho), self.kappa)


@lru_cache(maxsize=32)
def spectral_setup(eps: float = 0.0, kappa: float = 0.0) -> SpectralSetup:
    alpha = KAPPA0.alpha_bracket.mid
    if eps == 0.0:
        q, psi = fixed_point(alpha, kappa)
        d = -(1.0 - q) * psi if kappa == 0.0 else None
        if d is None:
            from .specfun import F_oneminusq_deriv
            s = math.sqrt(q)
            d = alpha * _E(lambda x: F_oneminusq_deriv(s * x, q, kappa))
        return SpectralSetup(0.0, alpha, q, psi, 1.0 - q, d, kappa)
    fp = perturbed_fixed_point(eps, alpha=alpha, kappa=kappa)
    return SpectralSetup(eps, alpha, fp.q_eps + eps, fp.psi_eps + eps, fp.varrho_eps, fp.d_eps, kappa)


def setup_from_fixed_point(fp: EpsFixedPoint) -> SpectralSetup:
    return SpectralSetup(fp.eps, fp.alpha, fp.q_eps + fp.eps, fp.psi_eps + fp.eps, fp.varrho_eps, fp.d_eps, fp.kappa)


class _Nodes:
    """Cached values of fdot and fhat on the quadrature nodes."""

    def __init__(self, S: SpectralSetup):
        from .threshold import _rule
        r = _rule()
        self.w = r.w
        self.fd = S.fdot(math.sqrt(S.psi_t) * r.x)
        self.fh = S.fhat(math.sqrt(S.q_t) * r.x)


@lru_cache(maxsize=32)
def _nodes(S: SpectralSetup) -> _Nodes:
    return _Nodes(S)


def _zmin(S: SpectralSetup) -> float:
    return -1.0 / (1.0 + S.eps)


def m_theta_lambda(z: float, eps: float = 0.0, setup: SpectralSetup | None = None) -> dict[str, float]:
    """m_eps(z), theta_eps(z) and lambda(z) (the eps = 0 objective, or its perturbed analogue)."""
    S = setup or spectral_setup(eps)
    if z <= _zmin(S):
        raise DomainError("z must exceed -1/(1+eps)")
    nd = _nodes(S)
    inv = 1.0 / (z + nd.fd)
    m = float(nd.w @ inv)
    m2 = float(nd.w @ inv**2)
    ratio = nd.fh / (1.0 + m * nd.fh)
    e1 = float(nd.w @ ratio)
    e2 = float(nd.w @ ratio**2)
    return {"m": m, "theta": m2 * e2, "lambda": z - S.alpha * e1 - S.d, "dm": -m2}


def z_star(eps: float = 0.0, tol: float = 1e-12, setup: SpectralSetup | None = None) -> float:
    """Root of theta(z) = 1/alpha* (theta strictly decreasing), bracketed in [-0.95, 10]."""
    S = setup or spectral_setup(eps)
    target = 1.0 / S.alpha
    lo = max(-0.95, _zmin(S) + 1e-6)
    hi = 10.0

    def h(z):
        return m_theta_lambda(z, setup=S)["theta"] - target

    if h(lo) <= 0 or h(hi) >= 0:
        raise NonConvergence("theta - 1/alpha does not change sign on the default bracket")
    return optimize.brentq(h, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def lambda_star(eps: float = 0.0, setup: SpectralSetup | None = None) -> float:
    S = setup or spectral_setup(eps)
    return m_theta_lambda(z_star(setup=S), setup=S)["lambda"]


def vartheta(t: float, z_of_t: float, setup: SpectralSetup) -> float:
    """Free-probability edge function at t = m_eps(z): z - alpha E[fh/(1 + t fh)]."""
    nd = _nodes(setup)
    return z_of_t - setup.alpha * float(nd.w @ (nd.fh / (1.0 + t * nd.fh)))


def m_inverse(t: float, setup: SpectralSetup) -> float:
    """z with m_eps(z) = t (m is strictly decreasing from +inf to 0)."""
    lo = _zmin(setup) + 1e-12
    hi = 1.0
    while m_theta_lambda(hi, setup=setup)["m"] > t:
        hi *= 2.0
    return optimize.brentq(lambda z: m_theta_lambda(z, setup=setup)["m"] - t, lo, hi, xtol=1e-14, rtol=1e-15)


# ---------------------------------------------------------------------------
# aggregate certificate
# ---------------------------------------------------------------------------

CLAIMS = ("p4", "r4", "m_zhat", "g", "condition3", "lambda_zhat", "C", "I", "M")


def run_all(kappa: float = 0.0, claims: tuple[str, ...] | None = None, delta: float = 1e-3,
            a_ub: Interval | None = None, mc: ModelConstants = KAPPA0) -> Certificate:
    """Run the interval claims; a failing claim is recorded, never raised."""
    if kappa != 0.0:
        raise ValueError("certification is only available for kappa = 0")
    want = set(claims or CLAIMS)
    cert = Certificate(meta={"kappa": kappa, "delta": delta})

    def timed(fn):
        t0 = time.perf_counter()
        v = fn()
        return v, time.perf_counter() - t0

    if "p4" in want:
        v, w = timed(lambda: enclose_p4(mc))
        cert.records.append(check("p4", v, APPX.p4_bracket, "subset", w))
    if "r4" in want:
        v, w = timed(lambda: enclose_r4(mc, r4_grid(delta)))
        cert.records.append(check("r4", v, APPX.r4_bracket, "subset", w))
    if "m_zhat" in want:
        v, w = timed(lambda: enclose_m_at(APPX.z_hat, mc))
        cert.records.append(check("m_zhat", v, Interval(0.0, APPX.m_ub.hi), "leq", w))
    if "g" in want:
        v, w = timed(lambda: enclose_g(mc, grid=GridSpec(8.0, delta, "bounded_by_one")))
        cert.records.append(check("g", v, Interval(APPX.g_lb.lo, 1e300), "geq", w))
    if "condition3" in want:
        v, w = timed(lambda: condition3_chain(mc))
        a = a_ub if a_ub is not None else APPX.a_ub
        cert.records.append(check("condition3", v, Interval(-1e300, a.hi), "leq", w,
                                  note="chain evaluated at the reference p4/r4 bracket endpoints"))
    if "lambda_zhat" in want:
        v, w = timed(lambda: lambda_zhat_chain(mc))
        cert.records.append(check("lambda_zhat", v, Interval(-1e300, APPX.lambda_ub.hi), "leq", w))
    if want & {"C", "I", "M"}:
        from .firstmoment import hessian_records
        cert.records.extend(r for r in hessian_records(mc) if r.claim_id.split("_")[0] in want)
    return cert
