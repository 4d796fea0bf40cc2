"""Null-model simulation: disorder, perturbed AMP, state evolution and the TAP free energy.

Random numbers come from numpy's PCG64 bit generator; normals are drawn with
``Generator.standard_normal``, which uses numpy's ziggurat method.  The draw
order is G (row-major), then g_dot, then g_hat, so a seed fixes all three.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .gaussenc import GaussRule
from .specfun import th_eps_inv
from .threshold import EpsFixedPoint, _rule


class DomainError(ValueError):
    pass


class SingularBlock(np.linalg.LinAlgError):
    """The n-n Hessian block failed to be positive definite."""


_SQ2 = math.sqrt(2.0)
_C = math.sqrt(2.0 / math.pi)


# ---------------------------------------------------------------------------
# scalar nonlinearities (double precision, vectorised)
# ---------------------------------------------------------------------------

def _calE(u):
    return _C / special.erfcx(u / _SQ2)


def _calE_derivs(u):
    e = _calE(u)
    e1 = e * (e - u)
    e2 = e1 * (2 * e - u) - e
    e3 = e2 * (2 * e - u) + 2 * e1 * e1 - 2 * e1
    return e, e1, e2, e3


def th_eps(x, eps: float):
    return np.tanh(x) + eps * x


def th_eps_prime(x, eps: float):
    c = np.cosh(np.minimum(np.abs(x), 350.0))
    return 1.0 / (c * c) + eps


@dataclass(frozen=True)
class FVals:
    Fbar: np.ndarray
    F: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    F3: np.ndarray


def F_all(x, eps: float, rho: float, kappa: float = 0.0) -> FVals:
    """Fbar_{eps,rho} and F_{eps,rho} with three derivatives in x."""
    x = np.asarray(x, dtype=float)
    if rho < 0:
        raise DomainError(f"rho = {rho} must be nonnegative")
    a = 1.0 + eps * rho
    S = math.sqrt((rho + eps * a) * a)
    if S == 0.0:
        raise DomainError("degenerate F: rho = eps = 0")
    u = (kappa * a - x) / S
    e, e1, e2, e3 = _calE_derivs(u)
    Fbar = -0.5 * math.log(a) - eps * x * x / (2 * a) + special.log_ndtr(-u)
    return FVals(Fbar, -eps * x / a + e / S, -eps / a - e1 / S**2, e2 / S**3, -e3 / S**4)


def F_eps(x, eps: float, rho: float, kappa: float = 0.0):
    a = 1.0 + eps * rho
    S = math.sqrt((rho + eps * a) * a)
    return -eps * np.asarray(x) / a + _calE((kappa * a - np.asarray(x)) / S) / S


# ---------------------------------------------------------------------------
# rho_eps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RhoEpsSpec:
    """rho(q) = varrho - t + (C_cvx/2) t^2 with t = q - q_eps, for |t| <= 0.2.

    Beyond |t| = 0.2 the offset t is replaced by sign(t)(0.2 + w tanh g(s)) with
    s = |t| - 0.2 and g(s) = s/w + s^3/(3 w^3), which agrees with the identity
    to fourth order at s = 0 and saturates at 0.2 + w.  The image of rho is
    the image of the quadratic on [-(0.2+w), 0.2+w]; w = 1 keeps rho and its
    first three derivatives within C_bd = 50.
    """

    eps: float
    q_eps: float
    varrho: float
    C_cvx: float = 10.0
    C_bd: float = 50.0
    kappa: float = 0.0
    width: float = 1.0
    knee: float = 0.2

    def __post_init__(self):
        T = self.knee + 4.0 * self.width
        D = np.array([self.derivs(q) for q in self.q_eps + np.linspace(-T, T, 2001)])
        if D[:, 0].min() < 1.0 / self.C_bd or D[:, 0].max() > self.C_bd:
            raise ValueError("rho_eps image leaves [1/C_bd, C_bd]; adjust C_cvx or width")
        if np.abs(D[:, 1:]).max() > self.C_bd:
            raise ValueError("rho_eps derivatives exceed C_bd; adjust C_cvx or width")

    @classmethod
    def from_fixed_point(cls, fp: EpsFixedPoint, **kw) -> "RhoEpsSpec":
        return cls(fp.eps, fp.q_eps, fp.varrho_eps, kappa=fp.kappa, **kw)

    def _poly(self, t):
        c = self.C_cvx
        return self.varrho - t + 0.5 * c * t * t, -1.0 + c * t, c

    def _offset(self, t: float):
        """t_tilde and its first three derivatives."""
        s = abs(t) - self.knee
        if s <= 0.0:
            return t, 1.0, 0.0, 0.0
        w = self.width
        g = s / w + s**3 / (3 * w**3)
        g1 = 1 / w + s * s / w**3
        g2 = 2 * s / w**3
        g3 = 2 / w**3
        T = math.tanh(g)
        h1 = w * (1 - T * T)
        h2 = -2 * w * T * (1 - T * T)
        h3 = -2 * w * (1 - T * T) * (1 - 3 * T * T)
        sg = 1.0 if t > 0 else -1.0
        v = sg * (self.knee + w * T)
        d1 = h1 * g1
        d2 = sg * (h2 * g1 * g1 + h1 * g2)
        d3 = h3 * g1**3 + 3 * h2 * g1 * g2 + h1 * g3
        return v, d1, d2, d3

    def derivs(self, q: float) -> tuple[float, float, float, float]:
        """(rho, rho', rho'', rho''') at q."""
        v, t1, t2, t3 = self._offset(q - self.q_eps)
        p0, p1, p2 = self._poly(v)
        return p0, p1 * t1, p2 * t1 * t1 + p1 * t2, 3 * p2 * t1 * t2 + p1 * t3

    def __call__(self, q: float) -> float:
        return self.derivs(q)[0]


@dataclass(frozen=True)
class ZeroMode:
    """The unperturbed free energy: rho(q) = 1 - q, eps = 0."""

    kappa: float = 0.0
    eps: float = 0.0

    def derivs(self, q: float):
        return 1.0 - q, -1.0, 0.0, 0.0

    def __call__(self, q: float) -> float:
        return 1.0 - q


def _mode(eps_mode) -> RhoEpsSpec | ZeroMode:
    if eps_mode is None or eps_mode == "zero":
        return ZeroMode()
    if isinstance(eps_mode, (RhoEpsSpec, ZeroMode)):
        return eps_mode
    raise TypeError("eps_mode must be 'zero' or a RhoEpsSpec")


# ---------------------------------------------------------------------------
# disorder
# ---------------------------------------------------------------------------

@dataclass
class Disorder:
    G: np.ndarray
    g_dot: np.ndarray
    g_hat: np.ndarray
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.G.shape[1]

    @property
    def M(self) -> int:
        return self.G.shape[0]


def default_M(N: int, alpha: float) -> int:
    return int(math.floor(alpha * N))


def sample_disorder(N: int, M: int, seed: int) -> Disorder:
    if N < 1 or M < 1:
        raise ValueError("N and M must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    G = rng.standard_normal((M, N))
    g_dot = rng.standard_normal(N)
    g_hat = rng.standard_normal(M)
    return Disorder(G, g_dot, g_hat, seed)


# ---------------------------------------------------------------------------
# AMP
# ---------------------------------------------------------------------------

@dataclass
class AmpState:
    """Holds m^k, n^{k-1} and the fields that produced them."""

    k: int
    m: np.ndarray
    n: np.ndarray
    h_dot: np.ndarray | None
    h_hat: np.ndarray | None
    eps: float
    history: list | None = None


def amp_init(d: Disorder, fp: EpsFixedPoint, keep_history: bool = False) -> AmpState:
    m = math.sqrt(fp.q_eps) * np.ones(d.N)
    return AmpState(0, m, np.zeros(d.M), None, None, fp.eps, [] if keep_history else None)


def amp_step(state: AmpState, d: Disorder, fp: EpsFixedPoint) -> AmpState:
    """n^k from m^k and n^{k-1}, then m^{k+1}."""
    sN = math.sqrt(d.N)
    se = math.sqrt(fp.eps)
    h_hat = d.G @ state.m / sN + se * d.g_hat - fp.varrho_eps * state.n
    n = F_eps(h_hat, fp.eps, fp.varrho_eps, fp.kappa)
    h_dot = d.G.T @ n / sN + se * d.g_dot - fp.d_eps * state.m
    m = th_eps(h_dot, fp.eps)
    hist = state.history
    if hist is not None:
        hist.append({"k": state.k, "m": state.m, "n": n, "h_hat": h_hat, "h_dot": h_dot})
    return AmpState(state.k + 1, m, n, h_dot, h_hat, fp.eps, hist)


def amp_run(d: Disorder, fp: EpsFixedPoint, k: int, keep_history: bool = True) -> AmpState:
    st = amp_init(d, fp, keep_history)
    for _ in range(k):
        st = amp_step(st, d, fp)
    return st


# ---------------------------------------------------------------------------
# state evolution
# ---------------------------------------------------------------------------

@dataclass
class SEArrays:
    qbar: np.ndarray
    psibar: np.ndarray
    Sigma_dot: np.ndarray
    Sigma_hat: np.ndarray


@lru_cache(maxsize=None)
def _inner_rule() -> GaussRule:
    return GaussRule(L=10.0, panels=40, per=20)


def _pair_expect(f, total: float, common: float) -> float:
    """E[f(X) f(Y)] with Var X = Var Y = total and Cov(X, Y) = common."""
    outer, inner = _rule(), _inner_rule()
    a = math.sqrt(max(common, 0.0))
    b = math.sqrt(max(total - common, 0.0))
    vals = f(a * outer.x[:, None] + b * inner.x[None, :]) @ inner.w
    return float(outer.w @ (vals * vals))


def P_AMP(psi: float, fp: EpsFixedPoint) -> float:
    return _pair_expect(lambda x: th_eps(x, fp.eps), fp.psi_eps + fp.eps, psi + fp.eps)


def R_AMP(q: float, fp: EpsFixedPoint) -> float:
    f = lambda x: F_eps(x, fp.eps, fp.varrho_eps, fp.kappa)
    return fp.alpha * _pair_expect(f, fp.q_eps + fp.eps, q + fp.eps)


def hermite_coeffs(f, p_max: int = 40) -> np.ndarray:
    """Coefficients of f in the orthonormal probabilists' Hermite basis."""
    r = _rule()
    fx = f(r.x)
    out = np.empty(p_max + 1)
    h_prev, h = np.zeros_like(r.x), np.ones_like(r.x)
    for p in range(p_max + 1):
        out[p] = r.w @ (fx * h)
        # He_{p+1}/sqrt((p+1)!) from the normalised three-term recurrence
        h_prev, h = h, (r.x * h - math.sqrt(p) * h_prev) / math.sqrt(p + 1)
    return out


def P_AMP_hermite(psi: float, fp: EpsFixedPoint, p_max: int = 40) -> float:
    s = math.sqrt(fp.psi_eps + fp.eps)
    a = hermite_coeffs(lambda x: th_eps(s * x, fp.eps), p_max)
    r = (psi + fp.eps) / (fp.psi_eps + fp.eps)
    return float(np.sum(a * a * r ** np.arange(p_max + 1)))


def R_AMP_hermite(q: float, fp: EpsFixedPoint, p_max: int = 40) -> float:
    s = math.sqrt(fp.q_eps + fp.eps)
    b = hermite_coeffs(lambda x: F_eps(s * x, fp.eps, fp.varrho_eps, fp.kappa), p_max)
    r = (q + fp.eps) / (fp.q_eps + fp.eps)
    return fp.alpha * float(np.sum(b * b * r ** np.arange(p_max + 1)))


def se_recursion(k: int, fp: EpsFixedPoint) -> SEArrays:
    """qbar_0..qbar_k, psibar_1..psibar_k and the covariance arrays."""
    if not 0 <= k <= 64:
        raise ValueError("k must lie in [0, 64]")
    qbar = np.zeros(k + 1)
    psibar = np.zeros(k)
    for j in range(1, k + 1):
        psibar[j - 1] = R_AMP(qbar[j - 1], fp)
        qbar[j] = P_AMP(psibar[j - 1], fp)
    # Sigma_dot indexed 1..k, Sigma_hat indexed 0..k
    Sd = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            Sd[i, j] = fp.psi_eps if i == j else psibar[min(i, j)]
    Sh = np.empty((k + 1, k + 1))
    for i in range(k + 1):
        for j in range(k + 1):
            Sh[i, j] = fp.q_eps if i == j else qbar[min(i, j)]
    return SEArrays(qbar, psibar, Sd, Sh)


# ---------------------------------------------------------------------------
# TAP free energy
# ---------------------------------------------------------------------------

def _V_star(m, eps: float):
    if eps == 0.0 and np.any(np.abs(m) >= 1.0):
        raise DomainError("m must lie in (-1, 1)^N when eps = 0")
    h = th_eps_inv(m, eps)
    return -m * h + np.logaddexp(h, -h) + 0.5 * eps * h * h, h


def _acute(m, n, d: Disorder, mode):
    N = d.N
    q = float(m @ m) / N
    rho, r1, r2, r3 = mode.derivs(q)
    if rho <= 0.0:
        raise DomainError(f"rho(q(m)) = {rho} is not positive")
    ha = d.G @ m / math.sqrt(N) - rho * n
    if mode.eps:
        ha = ha + math.sqrt(mode.eps) * d.g_hat
    return q, (rho, r1, r2, r3), ha


def tap_value(m, n, d: Disorder, eps_mode=None) -> float:
    mode = _mode(eps_mode)
    m, n = np.asarray(m, float), np.asarray(n, float)
    q, (rho, *_), ha = _acute(m, n, d, mode)
    V, _ = _V_star(m, mode.eps)
    Fb = F_all(ha, mode.eps, rho, mode.kappa).Fbar
    val = float(np.sum(V)) + float(np.sum(Fb)) + 0.5 * rho * float(n @ n)
    if mode.eps:
        val += math.sqrt(mode.eps) * float(d.g_dot @ m)
    return val


def d_eps_mn(m, n, d: Disorder, eps_mode=None) -> float:
    mode = _mode(eps_mode)
    _, (rho, *_), ha = _acute(m, n, d, mode)
    fv = F_all(ha, mode.eps, rho, mode.kappa)
    return float(np.sum((n - fv.F) ** 2 + fv.F1)) / d.N


def tap_grad(m, n, d: Disorder, eps_mode=None) -> tuple[np.ndarray, np.ndarray]:
    mode = _mode(eps_mode)
    m, n = np.asarray(m, float), np.asarray(n, float)
    N = d.N
    _, (rho, r1, _, _), ha = _acute(m, n, d, mode)
    fv = F_all(ha, mode.eps, rho, mode.kappa)
    dd = float(np.sum((n - fv.F) ** 2 + fv.F1)) / N
    gm = -th_eps_inv(m, mode.eps) + d.G.T @ fv.F / math.sqrt(N) + r1 * dd * m
    if mode.eps:
        gm = gm + math.sqrt(mode.eps) * d.g_dot
    return gm, rho * (n - fv.F)


def grad_norm(m, n, d: Disorder, eps_mode=None) -> float:
    gm, gn = tap_grad(m, n, d, eps_mode)
    return math.sqrt(float(gm @ gm + gn @ gn))


@dataclass
class TapHessian:
    mm: np.ndarray
    mn: np.ndarray
    nn: np.ndarray
    schur_diamond: np.ndarray
    diamond_explicit: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.mm, self.mn], [self.mn.T, self.nn]])


def tap_hessian(m, n, d: Disorder, spec=None, max_N: int = 200) -> TapHessian:
    """Dense Hessian blocks and the Schur complement of the n-n block."""
    mode = _mode(spec)
    m, n = np.asarray(m, float), np.asarray(n, float)
    N, M = d.N, d.M
    if N > max_N:
        raise ValueError(f"dense Hessian assembly limited to N <= {max_N}")
    sN = math.sqrt(N)
    _, (rho, r1, r2, _), ha = _acute(m, n, d, mode)
    fv = F_all(ha, mode.eps, rho, mode.kappa)
    F, F1, F2, F3 = fv.F, fv.F1, fv.F2, fv.F3
    G = d.G
    dd = float(np.sum((n - F) ** 2 + F1)) / N
    h = th_eps_inv(m, mode.eps)
    D1 = 1.0 / th_eps_prime(h, mode.eps)
    D4 = 1.0 + rho * F1
    nn_diag = rho * D4
    if np.min(nn_diag) <= 0.0:
        raise SingularBlock(f"n-n block has minimum eigenvalue {np.min(nn_diag):.3g}")

    u = F2 + 2 * F1 * (F - n)
    w = 2 * D4 * (n - F) - rho * F2
    c = 2 * r2 * dd + r1 * r1 / N * float(np.sum(4 * (F - n) * F2 + 4 * (F - n) ** 2 * F1 + F3 + 2 * F1 * F1))

    GtD3G = G.T @ (F1[:, None] * G) / N
    Gu = G.T @ u
    mm = -np.diag(D1) + GtD3G + r1 * dd * np.eye(N) \
        + r1 * (np.outer(Gu, m) + np.outer(m, Gu)) / N**1.5 + c * np.outer(m, m) / N
    mn = -rho * (G.T * F1[None, :]) / sN + r1 * np.outer(m, w) / N
    nn = np.diag(nn_diag)

    schur = mm - mn @ (mn.T / nn_diag[:, None])

    D2t = -F1 / D4
    GD4F2 = G.T @ (F2 / D4)
    c_d = c - r1 * r1 / N * float(np.sum(w * w / nn_diag))
    explicit = -np.diag(D1) - G.T @ (D2t[:, None] * G) / N + r1 * dd * np.eye(N) \
        + r1 * (np.outer(GD4F2, m) + np.outer(m, GD4F2)) / N**1.5 + c_d * np.outer(m, m) / N
    return TapHessian(mm, mn, nn, schur, explicit)


def eta_lower(rho: float, eps: float) -> float:
    """Lower bound on the smallest eigenvalue of the n-n block."""
    return eps * rho / (rho + eps * (1 + eps * rho))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def amp_diagnostics(d: Disorder, fp: EpsFixedPoint, k: int, spec: RhoEpsSpec | None = None) -> list[dict]:
    """Per-iteration rows for the matched pairs (m^j, n^j), j < k: gradient norm
    of the perturbed free energy over sqrt(N) and overlap errors."""
    spec = spec or RhoEpsSpec.from_fixed_point(fp)
    st = amp_init(d, fp)
    rows = []
    for _ in range(k):
        m_j = st.m
        st = amp_step(st, d, fp)
        rows.append({
            "k": st.k - 1,
            "grad_norm": grad_norm(m_j, st.n, d, spec) / math.sqrt(d.N),
            "q_err": abs(float(m_j @ m_j) / d.N - fp.q_eps),
            "psi_err": abs(float(st.n @ st.n) / d.N - fp.psi_eps),
        })
    return rows


def diagnostics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "grad_norm", "q_err", "psi_err"])
    for r in rows:
        w.writerow([r["k"], repr(r["grad_norm"]), repr(r["q_err"]), repr(r["psi_err"])])
    return buf.getvalue()
