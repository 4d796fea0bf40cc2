"""Scalar special functions over floats (numpy) and intervals.

The double realisation uses scipy's scaled complementary error function.
The interval realisation of the Mills-ratio function

    E(x) = phi(x) / Psi(x)

encloses 1/E(x) = int_x^{L+} exp(-(y^2 - x^2)/2) dy + [0, exp(-(L+^2 - x^2)/2)/sqrt(2 pi)]
and inverts.  The inner integral comes from a cached table of cell integrals of
exp(-y^2/2) on a fixed mesh, plus a partial cell from x to the next mesh point.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import interval as iv
from .interval import DomainError, IArray, Interval, ISeries

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI_F = 1.0 / math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI_F = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CalEEnclosureCfg:
    """Configuration of the interval evaluation of E.

    ``method='taylor'`` integrates each mesh cell with a validated Taylor
    expansion (order ``order``); ``method='riemann'`` uses monotone lower/upper
    Riemann sums on each side of 0.
    """

    L_plus: float = 12.0
    sub_mesh: float = 2.0**-7
    method: str = "taylor"
    order: int = 16

    def __post_init__(self):
        if self.L_plus < 12:
            raise ValueError("L_plus must be >= 12")
        if not (0 < self.sub_mesh <= 0.01):
            raise ValueError("sub_mesh must lie in (0, 0.01]")
        if self.method not in ("taylor", "riemann"):
            raise ValueError("method must be 'taylor' or 'riemann'")
        if self.order % 2:
            raise ValueError("order must be even")


DEFAULT_CFG = CalEEnclosureCfg()
RIEMANN_CFG = CalEEnclosureCfg(sub_mesh=1e-3, method="riemann")
X_MAX_INTERVAL = 10.0


@dataclass(frozen=True)
class EpsParams:
    eps: float
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.eps <= 0.5):
            raise ValueError("eps must lie in [0, 0.5]")
        if not (0.1 <= self.rho <= 10.0):
            raise ValueError("rho must lie in [0.1, 10]")


# ---------------------------------------------------------------------------
# Gaussian density and tail
# ---------------------------------------------------------------------------

def phi(x):
    if iv.is_interval(x):
        return iv.exp(-0.5 * iv.sqr(x)) * iv.INV_SQRT_2PI
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) * INV_SQRT_2PI_F


def Psi(x, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    if iv.is_interval(x):
        # Psi is decreasing: evaluate phi/E at the endpoints
        xa = IArray.of(x)
        lo = _psi_points(xa.hi, cfg).lo
        hi = _psi_points(xa.lo, cfg).hi
        out = IArray(lo, hi, check=False)
        return out.item() if isinstance(x, Interval) else out
    return special.ndtr(-np.asarray(x, dtype=float))


def _psi_points(pts, cfg):
    p = IArray.of(pts)
    return phi(p) / calE_points(pts, cfg)


def logPsi(x, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    if iv.is_interval(x):
        xa = IArray.of(x)
        lo = _logpsi_points(xa.hi, cfg).lo
        hi = _logpsi_points(xa.lo, cfg).hi
        out = IArray(lo, np.minimum(hi, 0.0), check=False)
        return out.item() if isinstance(x, Interval) else out
    return special.log_ndtr(-np.asarray(x, dtype=float))


def _logpsi_points(pts, cfg):
    p = IArray(np.asarray(pts, dtype=float))
    return -0.5 * p.sqr() - iv.LOG_SQRT_2PI - calE_points(pts, cfg).log()


# ---------------------------------------------------------------------------
# E = phi / Psi
# ---------------------------------------------------------------------------

def calE(x, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    """Mills-ratio function E(x) = phi(x)/Psi(x)."""
    if iv.is_interval(x):
        xa = IArray.of(x)
        if np.any(xa.hi > X_MAX_INTERVAL):
            raise DomainError("interval evaluation of E requires x <= 10")
        # E is increasing
        lo = calE_points(xa.lo, cfg).lo
        hi = calE_points(xa.hi, cfg).hi
        out = IArray(np.maximum(lo, 0.0), hi, check=False)
        return out.item() if isinstance(x, Interval) else out
    x = np.asarray(x, dtype=float)
    return SQRT_2_OVER_PI / special.erfcx(x / math.sqrt(2.0))


def calE_derivs(x, order: int, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    """E' = E (E - x) and E'' = E' (2E - x) - E."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if iv.is_interval(x):
        xa = IArray.of(x)
        if order == 1:
            # E' is increasing because E'' > 0
            lo = _calE1_points(xa.lo, cfg).lo
            hi = _calE1_points(xa.hi, cfg).hi
            out = IArray(lo, hi, check=False).clip(0.0, 1.0)
        else:
            out = _calE_higher_interval(xa, order, cfg)
        return out.item() if isinstance(x, Interval) else out
    x = np.asarray(x, dtype=float)
    e = calE(x)
    e1 = e * (e - x)
    if order == 1:
        return e1
    e2 = e1 * (2.0 * e - x) - e
    if order == 2:
        return e2
    return e2 * (2.0 * e - x) + 2.0 * e1 * e1 - 2.0 * e1


def _calE1_points(pts, cfg) -> IArray:
    p = IArray(np.asarray(pts, dtype=float))
    e = calE_points(pts, cfg)
    return (e * (e - p)).clip(0.0, 1.0)


def _calE_higher_interval(xa: IArray, order: int, cfg) -> IArray:
    e = calE(xa, cfg)
    e1 = calE_derivs(xa, 1, cfg)
    e2 = (e1 * (2.0 * e - xa) - e).clip(0.0, 1.0)
    if order == 2:
        return e2
    return e2 * (2.0 * e - xa) + 2.0 * e1.sqr() - 2.0 * e1


# --- the enclosure table ---------------------------------------------------

class _CalETable:
    """Cell integrals of exp(-y^2/2) on a mesh covering [y0, L+]."""

    def __init__(self, cfg: CalEEnclosureCfg, y0: int):
        self.cfg = cfg
        h = cfg.sub_mesh
        j0 = int(math.floor(y0 / h))
        j1 = int(math.ceil(cfg.L_plus / h))
        j = np.arange(j0, j1 + 1, dtype=float)
        self.h = h
        self.j0 = j0
        self.y = j * h  # exact when h is dyadic; otherwise cells still partition
        self.y_top = float(self.y[-1])
        lo, hi = self.y[:-1], self.y[1:]
        if cfg.method == "taylor":
            cells = _taylor_cells_gauss(lo, hi, cfg.order)
        else:
            cells = _riemann_cells_gauss(lo, hi)
        # J(y_i) = sum over cells k >= i, accumulated from the top
        icum = iv.icumsum(cells[::-1])[::-1]
        z = IArray(np.zeros(1))
        self.J = IArray(np.concatenate([icum.lo, z.lo]), np.concatenate([icum.hi, z.hi]), check=False)

    def inv_calE(self, pts: np.ndarray) -> IArray:
        """Enclosure of 1/E at float points."""
        pts = np.asarray(pts, dtype=float)
        idx = np.ceil(pts / self.h).astype(np.int64) - self.j0
        idx = np.clip(idx, 0, len(self.y) - 1)
        yi = self.y[idx]
        bump = yi < pts
        if np.any(bump):
            idx = np.where(bump, idx + 1, idx)
            yi = self.y[idx]
        part = _partial_gauss(pts, yi, self.cfg)
        J = self.J[idx] + part
        u2 = IArray(pts).sqr()
        K = (0.5 * u2).exp() * J
        tail = (-0.5 * (Interval(self.y_top, self.y_top).sqr() - u2)).exp() * iv.INV_SQRT_2PI
        return K + IArray(np.zeros_like(pts), tail.hi)


def _taylor_cells_gauss(lo: np.ndarray, hi: np.ndarray, order: int) -> IArray:
    """Validated integrals of exp(-y^2/2) over each [lo, hi] (equal widths)."""
    r = 0.5 * (hi[0] - lo[0])
    c = lo + r
    if not np.all(c - r == lo) or not np.all(c + r == hi):
        raise ValueError("taylor cells need an exactly representable mesh (use a dyadic sub_mesh)")
    x_pt = ISeries.variable(IArray(c), order - 1)
    s_pt = (x_pt.sqr() * -0.5).exp()
    x_iv = ISeries.variable(IArray(lo, hi), order)
    s_iv = (x_iv.sqr() * -0.5).exp()
    return s_pt.integrate_cell(r, s_iv.c[order])


def _riemann_cells_gauss(lo: np.ndarray, hi: np.ndarray) -> IArray:
    w = IArray(hi) - IArray(lo)
    flo = phi(IArray(lo)) * iv.SQRT_2PI
    fhi = phi(IArray(hi)) * iv.SQRT_2PI
    fmin = IArray(np.minimum(flo.lo, fhi.lo), np.minimum(flo.hi, fhi.hi), check=False)
    fmax = IArray(np.maximum(flo.lo, fhi.lo), np.maximum(flo.hi, fhi.hi), check=False)
    return IArray((w * fmin).lo, (w * fmax).hi, check=False)


def _partial_gauss(u: np.ndarray, y: np.ndarray, cfg: CalEEnclosureCfg) -> IArray:
    """Enclosure of int_u^y exp(-s^2/2) ds with 0 <= y - u <= mesh."""
    t = IArray(y) - IArray(u)
    t = IArray(np.maximum(t.lo, 0.0), t.hi, check=False)
    if cfg.method == "riemann":
        fu = phi(IArray(u)) * iv.SQRT_2PI
        fy = phi(IArray(y)) * iv.SQRT_2PI
        fmin = IArray(np.minimum(fu.lo, fy.lo), np.minimum(fu.hi, fy.hi), check=False)
        fmax = IArray(np.maximum(fu.lo, fy.lo), np.maximum(fu.hi, fy.hi), check=False)
        return IArray((t * fmin).lo, (t * fmax).hi, check=False)
    n = max(cfg.order // 2, 6)
    n += n % 2
    x_pt = ISeries.variable(IArray(u), n - 1)
    s_pt = (x_pt.sqr() * -0.5).exp()
    x_iv = ISeries.variable(IArray(u).hull(IArray(y)), n)
    rem = (x_iv.sqr() * -0.5).exp().c[n]
    acc = None
    tp = t
    for k in range(n):
        term = s_pt.c[k] * tp / float(k + 1)
        acc = term if acc is None else acc + term
        tp = tp * t
    return acc + rem * tp / float(n + 1)


@functools.lru_cache(maxsize=16)
def _table(cfg: CalEEnclosureCfg, y0: int) -> _CalETable:
    return _CalETable(cfg, y0)


def calE_points(pts, cfg: CalEEnclosureCfg = DEFAULT_CFG) -> IArray:
    """Verified enclosure of E at each float point (all points <= 10)."""
    pts = np.atleast_1d(np.asarray(pts, dtype=float))
    if pts.size and np.max(pts) > X_MAX_INTERVAL:
        raise DomainError("interval evaluation of E requires x <= 10")
    y0 = -12
    if pts.size and np.min(pts) < y0:
        y0 = int(math.floor(np.min(pts))) - 1
    tab = _table(cfg, y0)
    inv = tab.inv_calE(pts)
    out = 1.0 / inv
    return IArray(np.maximum(out.lo, 0.0), out.hi, check=False)


def calE_series(u: ISeries, cfg: CalEEnclosureCfg = DEFAULT_CFG) -> ISeries:
    """Taylor series of E(u(t)) for an affine u(t) = u0 + u1 t.

    Uses the Riccati equation E' = E^2 - u E, so the coefficients follow from a
    single enclosure of E at the expansion point (or over the expansion cell).
    """
    if any(np.any(np.abs(c.lo) > 1e-300) or np.any(np.abs(c.hi) > 1e-300) for c in u.c[2:]):
        raise ValueError("calE_series needs an affine argument")
    u0, u1 = u.c[0], u.c[1]
    y = [calE(u0, cfg)]
    n = u.order
    for k in range(n):
        # (y^2)_k - (u y)_k
        acc = y[0] * y[k]
        for j in range(1, k + 1):
            acc = acc + y[j] * y[k - j]
        uy = u0 * y[k]
        if k >= 1:
            uy = uy + u1 * y[k - 1]
        y.append(u1 * (acc - uy) / float(k + 1))
    return ISeries(y)


def logPsi_series(u: ISeries, cfg: CalEEnclosureCfg = DEFAULT_CFG) -> ISeries:
    """Taylor series of log Psi(u(t)) for affine u, using (log Psi)' = -E."""
    e = calE_series(u, cfg)
    u0, u1 = u.c[0], u.c[1]
    if np.any(u0.hi > X_MAX_INTERVAL):
        raise DomainError("interval evaluation of log Psi requires x <= 10")
    l0_lo = _logpsi_points(u0.hi, cfg).lo
    l0_hi = _logpsi_points(u0.lo, cfg).hi
    out = [IArray(l0_lo, np.minimum(l0_hi, 0.0), check=False)]
    for k in range(u.order):
        out.append(-(u1 * e.c[k]) / float(k + 1))
    return ISeries(out)


# ---------------------------------------------------------------------------
# constraint nonlinearities
# ---------------------------------------------------------------------------

def _check_q(q):
    qa = q.hi if isinstance(q, Interval) else (np.max(q.hi) if isinstance(q, IArray) else np.max(q))
    if qa >= 1.0:
        raise DomainError("q must be < 1")


def F_oneminusq(x, q, kappa=0.0, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    """F_{1-q}(x) = E((kappa - x)/sqrt(1-q)) / sqrt(1-q)."""
    _check_q(q)
    s = iv.sqrt(1.0 - q)
    return _calE_any((kappa - x) / s, cfg) / s


def F_oneminusq_deriv(x, q, kappa=0.0, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    _check_q(q)
    s2 = 1.0 - q
    u = (kappa - x) / iv.sqrt(s2)
    return -_calE1_any(u, cfg) / s2


def _calE_any(u, cfg):
    return calE(u, cfg) if iv.is_interval(u) else calE(u)


def _calE1_any(u, cfg):
    return calE_derivs(u, 1, cfg) if iv.is_interval(u) else calE_derivs(u, 1)


def hf0(x, q0, kappa=0.0, cfg: CalEEnclosureCfg = DEFAULT_CFG):
    """hat f_0 = -F'/(1 + (1-q0) F'), evaluated through the E' form."""
    _check_q(q0)
    u = (kappa - x) / iv.sqrt(1.0 - q0)
    e1 = _calE1_any(u, cfg)
    return e1 / ((1.0 - q0) * (1.0 - e1))


def hf0_via_F(x, q0, kappa=0.0):
    fp = F_oneminusq_deriv(x, q0, kappa)
    return -fp / (1.0 + (1.0 - q0) * fp)


def th_eps(x, eps: float):
    return iv.tanh(x) + eps * x


def th_eps_deriv(x, eps: float):
    return iv.sech2(x) + eps


def th_eps_inv(m, eps: float, tol: float = 1e-14, max_iter: int = 100):
    """Inverse of th_eps (strictly increasing) by safeguarded Newton, doubles only."""
    m = np.asarray(m, dtype=float)
    if eps == 0.0:
        return np.arctanh(m)
    h = m / (1.0 + eps)
    for _ in range(max_iter):
        f = np.tanh(h) + eps * h - m
        d = 1.0 / np.cosh(h) ** 2 + eps
        step = f / d
        h = h - step
        if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(h))):
            break
    return h


def _eps_parts(p: EpsParams, kappa):
    e, r = p.eps, p.rho
    a = 1.0 + e * r
    S = math.sqrt((r + e * a) * a)
    return e, r, a, S


def F_eps_rho(x, p: EpsParams, kappa=0.0):
    """F_{eps,rho}(x) = -eps x/(1+eps rho) + E((kappa(1+eps rho) - x)/S)/S."""
    e, r, a, S = _eps_parts(p, kappa)
    u = (kappa * a - x) / S
    return -e * x / a + _calE_any(u, DEFAULT_CFG) / S


def F_eps_rho_deriv(x, p: EpsParams, kappa=0.0, order: int = 1):
    e, r, a, S = _eps_parts(p, kappa)
    u = (kappa * a - x) / S
    if order == 1:
        return -e / a - calE_derivs(u, 1) / S**2
    if order == 2:
        return calE_derivs(u, 2) / S**3
    if order == 3:
        return -calE_derivs(u, 3) / S**4
    raise ValueError("order must be 1, 2 or 3")


def Fbar_eps_rho(x, p: EpsParams, kappa=0.0):
    e, r, a, S = _eps_parts(p, kappa)
    x = np.asarray(x, dtype=float)
    u = (kappa * a - x) / S
    return -0.5 * math.log(a) - e * x * x / (2.0 * a) + logPsi(u)


def Fp_bounds(p: EpsParams) -> tuple[float, float]:
    """Two-sided bound on F'_{eps,rho}."""
    e, r = p.eps, p.rho
    return -(1.0 + e * e) / (r + e * (1.0 + e * r)), -e / (1.0 + e * r)


def fdot_eps(x, eps: float):
    """ch^2 x / (1 + eps ch^2 x), i.e. 1/th_eps'(x)."""
    if iv.is_interval(x):
        c2 = iv.cosh(x).sqr()
        return 1.0 / (iv.sech2(x) + eps) if eps else c2
    x = np.asarray(x, dtype=float)
    # written as 1/(sech^2 + eps) to avoid overflow for large |x|
    c = np.cosh(np.minimum(np.abs(x), 350.0))
    return 1.0 / (1.0 / (c * c) + eps)


def fhat_eps(x, p: EpsParams, kappa=0.0):
    """-F'/(1 + rho F') for F = F_{eps,rho}."""
    fp = F_eps_rho_deriv(x, p, kappa)
    return -fp / (1.0 + p.rho * fp)
