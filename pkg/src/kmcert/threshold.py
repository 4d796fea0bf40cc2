"""The replica-symmetric fixed point, the Gardner volume and the capacity threshold.

Double-precision routines use one fixed composite Gauss-Legendre rule; the
interval routines use validated Taylor quadrature (see ``gaussenc``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import interval as iv
from .gaussenc import GaussRule, NonConvergence, enclose_gauss_expectation, enclose_gauss_taylor, tail_bound, GridSpec, MonotoneSpec
from .interval import Interval, ISeries
from .specfun import EpsParams, F_eps_rho, F_eps_rho_deriv, calE, calE_series, logPsi_series, th_eps, th_eps_deriv


class NoSignChange(ValueError):
    pass


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def _dec(lo: str, hi: str) -> Interval:
    return Interval.hull_of(Interval.from_decimal(lo), Interval.from_decimal(hi))


@dataclass(frozen=True)
class ModelConstants:
    kappa: float
    alpha_bracket: Interval
    q_bracket: Interval
    psi_bracket: Interval

    @staticmethod
    def kappa0() -> "ModelConstants":
        return ModelConstants(
            0.0,
            _dec("0.833078599", "0.833078600"),
            _dec("0.56394907949", "0.56394908030"),
            _dec("2.5763513100", "2.5763513224"),
        )

    @property
    def gamma_bracket(self) -> Interval:
        # q/(1-q) is increasing, so evaluate at the endpoints
        ql, qu = Interval.point(self.q_bracket.lo), Interval.point(self.q_bracket.hi)
        return Interval((ql / (1.0 - ql)).lo, (qu / (1.0 - qu)).hi)

    @property
    def d0_bracket(self) -> Interval:
        return -((1.0 - self.q_bracket) * self.psi_bracket)

    # endpoint helpers, each an exact point interval
    def lb(self, name: str) -> Interval:
        b = getattr(self, f"{name}_bracket")
        return Interval.point(b.lo)

    def ub(self, name: str) -> Interval:
        b = getattr(self, f"{name}_bracket")
        return Interval.point(b.hi)


KAPPA0 = ModelConstants.kappa0()


# ---------------------------------------------------------------------------
# double precision building blocks
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _rule() -> GaussRule:
    return GaussRule(L=12.0, panels=96, per=20)


def _E(f) -> float:
    r = _rule()
    return float(np.dot(r.w, f(r.x)))


def _calE_d(x):
    return math.sqrt(2.0 / math.pi) / special.erfcx(np.asarray(x) / math.sqrt(2.0))


def _F(x, q, kappa):
    s = math.sqrt(1.0 - q)
    return _calE_d((kappa - x) / s) / s


def P(psi):
    """E[th(sqrt(psi) Z)^2]; intervals get a validated enclosure."""
    if iv.is_interval(psi):
        return _P_interval(iv.to_interval(psi))
    if psi < 0:
        raise ValueError("psi must be >= 0")
    s = math.sqrt(psi)
    return _E(lambda x: np.tanh(s * x) ** 2)


def R_alpha(q, alpha, kappa: float = 0.0):
    """alpha E[F_{1-q}(sqrt(q) Z)^2]."""
    if iv.is_interval(q) or iv.is_interval(alpha):
        return _R_interval(iv.to_interval(q), iv.to_interval(alpha), kappa)
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")
    s = math.sqrt(q)
    return alpha * _E(lambda x: _F(s * x, q, kappa) ** 2)


def _gardner_double(alpha, q, psi, kappa):
    sp, sq, s1 = math.sqrt(psi), math.sqrt(q), math.sqrt(1.0 - q)
    ent = _E(lambda x: np.logaddexp(sp * x, -sp * x))
    lp = _E(lambda x: special.log_ndtr(-(kappa - sq * x) / s1))
    return -(1.0 - q) * psi / 2.0 + ent + alpha * lp


def gardner(alpha, q, psi, kappa: float = 0.0):
    """Gardner volume  -(1-q)psi/2 + E log(2ch(sqrt(psi)Z)) + alpha E log Psi((kappa - sqrt(q)Z)/sqrt(1-q)).

    log Psi is negative, so the constraint term lowers the volume.
    """
    if any(iv.is_interval(v) for v in (alpha, q, psi)):
        return _gardner_interval(iv.to_interval(alpha), iv.to_interval(q), iv.to_interval(psi), kappa)
    return _gardner_double(alpha, q, psi, kappa)


def fixed_point(alpha: float, kappa: float = 0.0, tol: float = 1e-13, damping: float = 0.5,
                max_iter: int = 10_000, q0: float = 0.5) -> tuple[float, float]:
    """Damped iteration q <- P(R_alpha(q)); returns (q, R_alpha(q))."""
    q = q0
    for _ in range(max_iter):
        qn = P(R_alpha(q, alpha, kappa))
        step = qn - q
        q = q + (1.0 - damping) * step
        if abs(step) <= tol:
            return q, R_alpha(q, alpha, kappa)
    raise NonConvergence("fixed point iteration did not converge")


def gardner_star(alpha: float, kappa: float = 0.0) -> float:
    q, psi = fixed_point(alpha, kappa)
    return _gardner_double(alpha, q, psi, kappa)


def contraction_factor(alpha: float, q: float, psi: float, kappa: float = 0.0) -> float:
    """alpha E[th'^2] E[F'^2], the slope of P o R_alpha at its fixed point."""
    sp, sq = math.sqrt(psi), math.sqrt(q)
    t = _E(lambda x: (1.0 / np.cosh(sp * x) ** 2) ** 2)
    s1 = math.sqrt(1.0 - q)

    def fp2(x):
        u = (kappa - sq * x) / s1
        e = _calE_d(u)
        return (e * (e - u) / (1.0 - q)) ** 2

    return alpha * t * _E(fp2)


# ---------------------------------------------------------------------------
# interval versions
# ---------------------------------------------------------------------------

_TAY = dict(cell=2.0**-4, order=12)


def _P_interval(psi: Interval) -> Interval:
    """Enclosure of P over psi: P is increasing, so evaluate at the two endpoints."""
    vals = []
    for e in (psi.lo, psi.hi):
        s = Interval.point(e).sqrt()
        tail = tail_bound("bounded_by_one", 10.0, 1.0, {"B": 1.0})
        vals.append(enclose_gauss_taylor(lambda x: (x * s).tanh().sqr(), L=10.0, tail=Interval(0.0, tail.hi), **_TAY))
    return Interval(vals[0].lo, vals[1].hi)


def _F_series(x: ISeries, q: Interval, kappa: float) -> ISeries:
    s = (1.0 - q).sqrt()
    return calE_series((kappa - x * q.sqrt()) / s) / s


def _R_interval(q: Interval, alpha: Interval, kappa: float, L: float = 8.0) -> Interval:
    """Enclosure of R_alpha; the integrand E(-sqrt(gamma) x)^2/(1-q) grows at most like (1+gamma^1/2|x|)^2/(1-q)."""
    vals = []
    for e in (q.lo, q.hi):
        qe = Interval.point(e)
        g = qe / (1.0 - qe)
        T = tail_bound("cauchy_schwarz_poly", L, g.sqrt().hi, {"p": 2}) / (1.0 - qe)
        v = enclose_gauss_taylor(lambda x: _F_series(x, qe, kappa).sqr(), L=L, tail=Interval(0.0, T.hi), **_TAY)
        vals.append(v)
    return alpha * Interval.hull_of(*vals)


def _gardner_interval(alpha: Interval, q: Interval, psi: Interval, kappa: float,
                      L_ent: float = 10.0, L_con: float = 8.0) -> Interval:
    """Enclosure of the Gardner volume at point-like arguments.

    Both expectations use validated Taylor quadrature.  log(2ch) is bounded by
    |y| + log 2 (linear tail); -log Psi obeys the logpsi_growth majorant.  The
    constraint cutoff is 8 so that every E argument stays below 10.
    """
    sp = psi.sqrt()
    sq = q.sqrt()
    s1 = (1.0 - q).sqrt()
    T1 = tail_bound("linear_growth", L_ent, sp.hi, {"a": 1.0, "b": math.log(2.0) + 1e-12})
    ent = enclose_gauss_taylor(lambda x: ((x * sp).cosh() * 2.0).log(), L=L_ent,
                               tail=Interval(0.0, T1.hi), **_TAY)
    sig = (sq / s1).hi
    T2 = tail_bound("logpsi_growth", L_con, sig, {})
    lp = enclose_gauss_taylor(lambda x: logPsi_series((kappa - x * sq) / s1), L=L_con,
                              tail=Interval(-T2.hi, 0.0), **_TAY)
    return -(1.0 - q) * psi / 2.0 + ent + alpha * lp


def gardner_gradient_box(alpha: Interval, q: Interval, psi: Interval, kappa: float = 0.0) -> tuple[Interval, Interval]:
    """Enclosures of (d/dq, d/dpsi) of the Gardner volume over a box.

    d/dpsi = (q - P(psi))/2 and d/dq = (psi - R_alpha(q))/2.
    """
    dpsi = (q - _P_interval(psi)) * 0.5
    dq = (psi - _R_interval(q, alpha, kappa)) * 0.5
    return dq, dpsi


def certify_gardner_at(alpha: float, kappa: float = 0.0, box: tuple[Interval, Interval] | None = None,
                       pad: float = 1e-9) -> dict:
    """Interval enclosure of the Gardner volume along the fixed-point curve at ``alpha``.

    The volume is enclosed at the double fixed point (q^, psi^) and transported
    to any point of the box by the mean-value form; since the gradient vanishes
    at the true fixed point it is tiny over a small box.  The box is the hull of
    the reference brackets and (q^, psi^) +- pad.  That the true fixed point at
    ``alpha`` lies in the box is taken from the double solve (tolerance 1e-13),
    not certified.
    """
    qh, ph = fixed_point(alpha, kappa)
    if box is None:
        box = (KAPPA0.q_bracket, KAPPA0.psi_bracket)
    qb = box[0].hull(Interval(qh - pad, qh + pad))
    pb = box[1].hull(Interval(ph - pad, ph + pad))
    a = Interval.point(alpha)
    center = _gardner_interval(a, Interval.point(qh), Interval.point(ph), kappa)
    dq, dpsi = gardner_gradient_box(a, qb, pb, kappa)
    enc = center + dq * (qb - qh) + dpsi * (pb - ph)
    return {"alpha": alpha, "q_hat": qh, "psi_hat": ph, "box_q": qb, "box_psi": pb, "value": enc}


def certify_sign_change(alpha_lo: float, alpha_hi: float, kappa: float = 0.0) -> dict:
    """Certify G* > 0 at alpha_lo and G* < 0 at alpha_hi (mean-value form, see above)."""
    lo = certify_gardner_at(alpha_lo, kappa)
    hi = certify_gardner_at(alpha_hi, kappa)
    ok = lo["value"].lo > 0.0 and hi["value"].hi < 0.0
    return {"lower": lo, "upper": hi, "certified": ok}


def alpha_star(kappa: float = 0.0, tol: float = 1e-9, bracket: tuple[float, float] | None = None,
               certify: bool = False) -> Interval:
    """Bisection on alpha -> G*(alpha) until the bracket is narrower than ``tol``."""
    a, b = bracket if bracket is not None else _default_bracket(kappa)
    fa, fb = gardner_star(a, kappa), gardner_star(b, kappa)
    if not (fa > 0 > fb):
        raise NoSignChange(f"G* does not change sign on [{a}, {b}]")
    while b - a > tol:
        c = 0.5 * (a + b)
        fc = gardner_star(c, kappa)
        if fc > 0:
            a = c
        else:
            b = c
    out = Interval(a, b)
    if certify:
        res = certify_sign_change(a, b, kappa)
        if not res["certified"]:
            raise NoSignChange("interval evaluation could not confirm the sign change")
    return out


def _default_bracket(kappa: float) -> tuple[float, float]:
    if kappa == 0.0:
        return 0.8, 0.9
    # crude scan: the capacity decreases with kappa
    lo, hi = 0.05, 2.0
    return lo, hi


# ---------------------------------------------------------------------------
# perturbed fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsFixedPoint:
    eps: float
    alpha: float
    q_eps: float
    psi_eps: float
    varrho_eps: float
    d_eps: float
    kappa: float = 0.0

    @property
    def params(self) -> EpsParams:
        return EpsParams(self.eps, self.varrho_eps)


def varrho_eps(q: float, psi: float, eps: float) -> float:
    return (1.0 - q + eps - eps * eps * (psi + eps)) / (1.0 - 2.0 * eps * (psi + eps))


def P_eps(psi: float, eps: float) -> float:
    s = math.sqrt(psi + eps)
    return _E(lambda x: (np.tanh(s * x) + eps * s * x) ** 2)


def R_eps(q: float, psi: float, eps: float, alpha: float, kappa: float = 0.0) -> float:
    p = EpsParams(eps, varrho_eps(q, psi, eps))
    s = math.sqrt(q + eps)
    return alpha * _E(lambda x: F_eps_rho(s * x, p, kappa) ** 2)


def perturbed_fixed_point(eps: float, tol: float = 1e-13, alpha: float | None = None,
                          kappa: float = 0.0, damping: float = 0.5, max_iter: int = 10_000) -> EpsFixedPoint:
    """Solve psi = R^eps(P^eps(psi), psi) by damped iteration from the unperturbed psi."""
    if alpha is None:
        alpha = KAPPA0.alpha_bracket.mid if kappa == 0.0 else alpha_star(kappa).mid
    _, psi = fixed_point(alpha, kappa)
    for _ in range(max_iter):
        new = R_eps(P_eps(psi, eps), psi, eps, alpha, kappa)
        step = new - psi
        psi = psi + (1.0 - damping) * step
        if abs(step) <= tol:
            break
    else:
        raise NonConvergence("perturbed fixed point did not converge")
    q = P_eps(psi, eps)
    rho = varrho_eps(q, psi, eps)
    p = EpsParams(eps, rho)
    s = math.sqrt(q + eps)
    d = alpha * _E(lambda x: F_eps_rho_deriv(s * x, p, kappa))
    return EpsFixedPoint(eps, alpha, q, psi, rho, d, kappa)


def zeta_slope(fp: EpsFixedPoint, h: float = 1e-5) -> float:
    """Central difference of zeta_eps at psi_eps (contraction probe)."""
    def z(p):
        return R_eps(P_eps(p, fp.eps), p, fp.eps, fp.alpha, fp.kappa)
    return (z(fp.psi_eps + h) - z(fp.psi_eps - h)) / (2 * h)


def mean_th_eps_deriv(psi: float, eps: float) -> float:
    s = math.sqrt(psi + eps)
    return _E(lambda x: th_eps_deriv(s * x, eps))
