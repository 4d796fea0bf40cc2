"""The two-parameter first-moment functional and its behaviour around (1, 0).

Notation: Hd ~ N(0, psi0), Hh ~ N(0, q0), M = th(Hd), N = F_{1-q0}(Hh) and
Lambda(x) = th(l1 x + l2 th x).  ``S_star_at`` is the functional at a given s,
``S_bar`` fixes s = sqrt(1-q0) and ``S_star`` minimises over s >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .certify import APPX, Record, check
from .gaussenc import NonConvergence
from .interval import Interval
from .threshold import KAPPA0, ModelConstants, _rule, fixed_point


class DegenerateDenominator(ArithmeticError):
    pass


IOTA = 1e-10


@dataclass(frozen=True)
class LambdaParams:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda1) and math.isfinite(self.lambda2)):
            raise ValueError("lambda parameters must be finite")


@dataclass(frozen=True)
class SPoint:
    s: float
    in_O: bool
    converged: bool
    boundary: bool = False


@dataclass(frozen=True)
class Background:
    alpha: float
    q0: float
    psi0: float
    d0: float
    kappa: float = 0.0


@lru_cache(maxsize=8)
def background(kappa: float = 0.0) -> Background:
    alpha = KAPPA0.alpha_bracket.mid
    q, psi = fixed_point(alpha, kappa)
    return Background(alpha, q, psi, -(1.0 - q) * psi, kappa)


class _Quad:
    """Nodes for Hd and Hh with the fixed functions M and N precomputed."""

    def __init__(self, bg: Background):
        r = _rule()
        self.w = r.w
        self.hd = math.sqrt(bg.psi0) * r.x
        self.m = np.tanh(self.hd)
        self.hh = math.sqrt(bg.q0) * r.x
        s = math.sqrt(1.0 - bg.q0)
        self.n = math.sqrt(2.0 / math.pi) / special.erfcx((bg.kappa - self.hh) / s / math.sqrt(2.0)) / s


@lru_cache(maxsize=8)
def _quad(bg: Background) -> _Quad:
    return _Quad(bg)


def _calE(x):
    return math.sqrt(2.0 / math.pi) / special.erfcx(x / math.sqrt(2.0))


def _y(p: LambdaParams, Q: _Quad):
    return p.lambda1 * Q.hd + p.lambda2 * Q.m


def _ent_terms(y):
    # H((1 + th y)/2) = log(2 ch y) - y th y
    return np.logaddexp(y, -y) - y * np.tanh(y)


def moments_of_lambda(p: LambdaParams, bg: Background | None = None) -> dict[str, float]:
    bg = bg or background()
    Q = _quad(bg)
    y = _y(p, Q)
    lam = np.tanh(y)
    return {
        "ent": float(Q.w @ _ent_terms(y)),
        "EM": float(Q.w @ (Q.m * lam)),
        "EH": float(Q.w @ (Q.hd * lam)),
    }


def _U(mom: dict, bg: Background, Q: _Quad):
    D = 1.0 - mom["EM"] ** 2 / bg.q0
    if D <= IOTA:
        raise DegenerateDenominator(f"1 - E[M Lambda]^2/q0 = {D:.3g}")
    num = bg.kappa - mom["EM"] / bg.q0 * Q.hh - mom["EH"] / bg.psi0 * Q.n
    return num, D


def S_star_at(p: LambdaParams, s: float, bg: Background | None = None, mom: dict | None = None) -> float:
    bg = bg or background()
    Q = _quad(bg)
    mom = mom or moments_of_lambda(p, bg)
    num, D = _U(mom, bg, Q)
    V = num / math.sqrt(D) + s * Q.n
    return 0.5 * s * s * bg.psi0 + mom["ent"] + bg.alpha * float(Q.w @ special.log_ndtr(-V))


def dS_ds(p: LambdaParams, s: float, bg: Background | None = None, mom: dict | None = None,
          second: bool = False):
    """First (and optionally second) s-derivative; (log Psi)' = -E."""
    bg = bg or background()
    Q = _quad(bg)
    mom = mom or moments_of_lambda(p, bg)
    num, D = _U(mom, bg, Q)
    V = num / math.sqrt(D) + s * Q.n
    e = _calE(V)
    d1 = s * bg.psi0 - bg.alpha * float(Q.w @ (e * Q.n))
    if not second:
        return d1
    e1 = e * (e - V)
    d2 = bg.psi0 - bg.alpha * float(Q.w @ (e1 * Q.n**2))
    return d1, d2


def S_bar(p: LambdaParams, bg: Background | None = None) -> float:
    bg = bg or background()
    return S_star_at(p, math.sqrt(1.0 - bg.q0), bg)


def in_O(mom: dict, bg: Background) -> tuple[bool, bool]:
    """(membership, boundary flag) for d0 E[M Lambda] + E[Hd Lambda] > alpha kappa."""
    v = bg.d0 * mom["EM"] + mom["EH"] - bg.alpha * bg.kappa
    return v > 1e-12, abs(v) <= 1e-12


def S_star(p: LambdaParams, bg: Background | None = None, s_cap: float | None = None,
           tol: float = 1e-11, max_newton: int = 100) -> tuple[float, SPoint]:
    """inf over s >= 0 (or over [0, s_cap]) of S_star_at."""
    bg = bg or background()
    mom = moments_of_lambda(p, bg)
    inside, boundary = in_O(mom, bg)
    if not inside and s_cap is None:
        # on the boundary the infimum is still -inf; the flag marks that the
        # membership test was decided by a rounding-level margin
        return -math.inf, SPoint(math.inf, False, not boundary, boundary)
    hi_cap = s_cap if s_cap is not None else 50.0
    if dS_ds(p, 0.0, bg, mom) >= 0.0:
        return S_star_at(p, 0.0, bg, mom), SPoint(0.0, inside, True)
    if s_cap is not None and dS_ds(p, s_cap, bg, mom) <= 0.0:
        return S_star_at(p, s_cap, bg, mom), SPoint(s_cap, inside, True)
    s = min(math.sqrt(1.0 - bg.q0), hi_cap)
    lo, hi = 0.0, hi_cap
    for _ in range(max_newton):
        d1, d2 = dS_ds(p, s, bg, mom, second=True)
        if abs(d1) <= tol:
            return S_star_at(p, s, bg, mom), SPoint(s, inside, True)
        if d1 > 0:
            hi = min(hi, s)
        else:
            lo = max(lo, s)
        step = s - d1 / d2
        s = step if lo < step < hi else 0.5 * (lo + hi)
    # bisection fallback
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        d1 = dS_ds(p, mid, bg, mom)
        if d1 > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-14:
            s = 0.5 * (lo + hi)
            return S_star_at(p, s, bg, mom), SPoint(s, inside, abs(dS_ds(p, s, bg, mom)) <= 1e-8)
    raise NonConvergence("inner minimisation over s did not converge")


def grad_osS(p: LambdaParams, bg: Background | None = None) -> np.ndarray:
    """Gradient of S_bar in (lambda1, lambda2), each component a sum of 1D quadratures."""
    bg = bg or background()
    Q = _quad(bg)
    mom = moments_of_lambda(p, bg)
    num, D = _U(mom, bg, Q)
    s = math.sqrt(1.0 - bg.q0)
    V = num / math.sqrt(D) + s * Q.n
    e = _calE(V)
    y = _y(p, Q)
    lam = np.tanh(y)
    out = np.empty(2)
    for k, u in enumerate((Q.hd, Q.m)):
        delta = (1.0 - lam**2) * u
        eMd = float(Q.w @ (Q.m * delta))
        eHd = float(Q.w @ (Q.hd * delta))
        dV = (-eMd / bg.q0 * Q.hh - eHd / bg.psi0 * Q.n) / math.sqrt(D) \
            + num / D**1.5 * mom["EM"] * eMd / bg.q0
        out[k] = -float(Q.w @ (y * delta)) - bg.alpha * float(Q.w @ (e * dV))
    return out


# ---------------------------------------------------------------------------
# Hessian at (1, 0)
# ---------------------------------------------------------------------------

def C_closed(alpha, q, psi, r4):
    C1 = -alpha * r4 / (psi * psi * (1.0 - q) * (1.0 + 2.0 * q))
    C2 = 2.0 * (2.0 - q) * alpha * r4 / (psi * (1.0 - q * q) * (1.0 + 2.0 * q)) + 2.0 * q / (1.0 - q * q)
    C3 = -alpha * r4 / ((1.0 - q) * (1.0 + 2.0 * q)) + psi / (1.0 - q)
    return C1, C2, C3


def I_closed(q, psi, p4):
    b = 1.0 - 4.0 * q + 3.0 * p4
    return psi * (1.0 - q) - 2.0 * psi * psi * b, psi * b, q - p4


def M_assemble(C, I):
    C1, C2, C3 = C
    I1, I2, I3 = I
    M11 = -I1 + C1 * I1 * I1 + C2 * I1 * I2 + C3 * I2 * I2
    M12 = -I2 + C1 * I1 * I2 + 0.5 * C2 * (I2 * I2 + I1 * I3) + C3 * I2 * I3
    M22 = -I3 + C1 * I2 * I2 + C2 * I2 * I3 + C3 * I3 * I3
    return M11, M12, M22


@dataclass
class HessianReport:
    C1: object
    C2: object
    C3: object
    I1: object
    I2: object
    I3: object
    M11: object
    M22: object
    M12: object
    detM: object
    extra: dict | None = None

    def matrix(self) -> np.ndarray:
        f = lambda v: v.mid if isinstance(v, Interval) else float(v)
        return np.array([[f(self.M11), f(self.M12)], [f(self.M12), f(self.M22)]])


def _direct_C(bg: Background) -> tuple[float, float, float]:
    """C1..C3 from their expectation definitions (double)."""
    Q = _quad(bg)
    s = math.sqrt(1.0 - bg.q0)
    u = (bg.kappa - Q.hh) / s
    e = _calE(u)
    Fp = -e * (e - u) / (1.0 - bg.q0)
    K = Q.hh / (bg.q0 * (1.0 - bg.q0)) + Q.n
    a, p = bg.alpha, bg.psi0
    C1 = a / p**2 * float(Q.w @ (Fp * Q.n**2))
    C2 = 2 * a / p * float(Q.w @ (Fp * K * Q.n)) + 2.0 / (1.0 - bg.q0)
    C3 = a * float(Q.w @ (Fp * K**2)) + p / bg.q0
    return C1, C2, C3


def _direct_I(bg: Background) -> tuple[float, float, float]:
    Q = _quad(bg)
    w = 1.0 - Q.m**2
    return (float(Q.w @ (w * Q.hd**2)), float(Q.w @ (w * Q.hd * Q.m)), float(Q.w @ (w * Q.m**2)))


def _r4_p4_double(bg: Background) -> tuple[float, float]:
    r = _rule()
    g = bg.q0 / (1.0 - bg.q0)
    r4 = float(r.w @ _calE(math.sqrt(g) * r.x) ** 4)
    p4 = float(r.w @ np.tanh(math.sqrt(bg.psi0) * r.x) ** 4)
    return r4, p4


# reference brackets (M12 reordered so that lo <= hi)
C_BRACKETS = (("-0.7193", "-0.7165"), ("5.0439", "5.0568"), ("1.1345", "1.1526"))
I_BRACKETS = (("0.24759912", "0.24759923"), ("0.16997315", "0.16997318"), ("0.12335884", "0.12335885"))
M11_UB, M22_UB = "-0.045408", "-0.020490"
M12_BRACKET = ("-0.026567", "-0.025685")
DET_LB = "0.0002246"


def _br(pair) -> Interval:
    return Interval.hull_of(Interval.from_decimal(pair[0]), Interval.from_decimal(pair[1]))


def hessian_at_origin(mode: str = "double", mc: ModelConstants = KAPPA0, bg: Background | None = None) -> HessianReport:
    """C, I, M at (1, 0).

    double: closed forms at the double fixed point, with direct quadrature of
    the C and I definitions reported in ``extra`` as a cross-check.
    interval: closed forms over the reference brackets, using the certified
    p4/r4 brackets; M is assembled from the reference C/I brackets.
    """
    if mode == "double":
        bg = bg or background()
        r4, p4 = _r4_p4_double(bg)
        C = C_closed(bg.alpha, bg.q0, bg.psi0, r4)
        I = I_closed(bg.q0, bg.psi0, p4)
        M11, M12, M22 = M_assemble(C, I)
        extra = {"C_direct": _direct_C(bg), "I_direct": _direct_I(bg), "r4": r4, "p4": p4}
        return HessianReport(*C, *I, M11, M22, M12, M11 * M22 - M12 * M12, extra)
    if mode != "interval":
        raise ValueError("mode must be 'double' or 'interval'")
    C = C_closed(mc.alpha_bracket, mc.q_bracket, mc.psi_bracket, APPX.r4_bracket)
    I = I_closed(mc.q_bracket, mc.psi_bracket, APPX.p4_bracket)
    Cp = tuple(_br(b) for b in C_BRACKETS)
    Ip = tuple(_br(b) for b in I_BRACKETS)
    M11, M12, M22 = M_assemble(Cp, Ip)
    det = M11 * M22 - M12.sqr()
    return HessianReport(*C, *I, M11, M22, M12, det, {"M_from_computed": M_assemble(C, I)})


def hessian_records(mc: ModelConstants = KAPPA0) -> list[Record]:
    import time
    t0 = time.perf_counter()
    H = hessian_at_origin("interval", mc)
    w = time.perf_counter() - t0
    recs = []
    for k, (v, b) in enumerate(zip((H.C1, H.C2, H.C3), C_BRACKETS), 1):
        recs.append(check(f"C_{k}", v, _br(b), "subset", w))
    for k, (v, b) in enumerate(zip((H.I1, H.I2, H.I3), I_BRACKETS), 1):
        recs.append(check(f"I_{k}", v, _br(b), "subset", w))
    big = 1e300
    recs.append(check("M_11", H.M11, Interval(-big, Interval.from_decimal(M11_UB).hi), "leq", w))
    recs.append(check("M_22", H.M22, Interval(-big, Interval.from_decimal(M22_UB).hi), "leq", w))
    recs.append(check("M_12", H.M12, _br(M12_BRACKET), "subset", w,
                      note="bracket endpoints given in reverse order; checked against the reordered interval"))
    recs.append(check("M_det", H.detM, Interval(Interval.from_decimal(DET_LB).lo, big), "geq", w))
    return recs


def fd_hessian(bg: Background | None = None, h: float = 1e-4) -> np.ndarray:
    """Second central differences of S_bar at (1, 0)."""
    bg = bg or background()
    f = lambda a, b: S_bar(LambdaParams(1.0 + a, b), bg)
    f0 = f(0.0, 0.0)
    H = np.empty((2, 2))
    H[0, 0] = (f(h, 0) - 2 * f0 + f(-h, 0)) / h**2
    H[1, 1] = (f(0, h) - 2 * f0 + f(0, -h)) / h**2
    H[0, 1] = H[1, 0] = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    return H


# ---------------------------------------------------------------------------
# landscape
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LandscapeGrid:
    x_min: float = -0.99
    x_max: float = 0.99
    y_min: float = -0.99
    y_max: float = 0.99
    n: int = 101

    def __post_init__(self):
        for v in (self.x_min, self.x_max, self.y_min, self.y_max):
            if not -1.0 < v < 1.0:
                raise ValueError("grid must lie inside (-1, 1)^2")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    def axes(self):
        return np.linspace(self.x_min, self.x_max, self.n), np.linspace(self.y_min, self.y_max, self.n)


def _S_bar_batch(L1: np.ndarray, L2: np.ndarray, bg: Background) -> np.ndarray:
    """Vectorised S_bar over arrays of parameters (one row of quadrature per parameter)."""
    Q = _quad(bg)
    y = L1[:, None] * Q.hd[None, :] + L2[:, None] * Q.m[None, :]
    lam = np.tanh(y)
    ent = _ent_terms(y) @ Q.w
    EM = (lam * Q.m) @ Q.w
    EH = (lam * Q.hd) @ Q.w
    D = 1.0 - EM**2 / bg.q0
    bad = D <= IOTA
    D = np.where(bad, np.nan, D)
    s = math.sqrt(1.0 - bg.q0)
    V = (bg.kappa - (EM / bg.q0)[:, None] * Q.hh[None, :] - (EH / bg.psi0)[:, None] * Q.n[None, :]) \
        / np.sqrt(D)[:, None] + s * Q.n[None, :]
    lp = special.log_ndtr(-V) @ Q.w
    return 0.5 * s * s * bg.psi0 + ent + bg.alpha * lp


def landscape_scan(grid: LandscapeGrid | None = None, kappa: float = 0.0, chunk: int = 256) -> dict:
    """S_bar(th^-1 x, th^-1 y) on the grid, rows in row-major (x outer, y inner) order."""
    grid = grid or LandscapeGrid()
    bg = background(kappa)
    xs, ys = grid.axes()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    L1, L2 = np.arctanh(X.ravel()), np.arctanh(Y.ravel())
    vals = np.empty(L1.size)
    for i in range(0, L1.size, chunk):
        vals[i:i + chunk] = _S_bar_batch(L1[i:i + chunk], L2[i:i + chunk], bg)
    k = int(np.nanargmax(vals))
    return {
        "x": X.ravel(), "y": Y.ravel(), "value": vals,
        "argmax": (float(X.ravel()[k]), float(Y.ravel()[k])), "max": float(vals[k]),
        "dx": float(xs[1] - xs[0]), "dy": float(ys[1] - ys[0]),
    }
