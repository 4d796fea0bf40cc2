"""Planted model: disorder conditioned on a prescribed TAP stationary point.

Given (h_dot, h_hat) we set m = th_eps(h_dot), n = F_{eps, rho(q(m))}(h_hat),
draw G from its Gaussian law conditional on the stationarity equations, and
then solve those equations for g_hat and g_dot, so the planted point is an
exact critical point of the perturbed free energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import certify
from .ampsim import (Disorder, F_all, F_eps, RhoEpsSpec, amp_init, amp_step, default_M,
                     tap_grad, th_eps, th_eps_prime)
from .threshold import EpsFixedPoint


class DegenerateNorm(ValueError):
    pass


class PowerIterationStall(RuntimeError):
    pass


@dataclass
class PlantedInput:
    N: int
    M: int
    h_dot: np.ndarray
    h_hat: np.ndarray
    eps: float
    spec: RhoEpsSpec
    seed: int

    def __post_init__(self):
        if self.h_dot.shape != (self.N,) or self.h_hat.shape != (self.M,):
            raise ValueError("field shapes do not match (N, M)")
        if self.eps <= 0.0:
            raise ValueError("the planted model needs eps > 0")

    @property
    def m(self) -> np.ndarray:
        return th_eps(self.h_dot, self.eps)

    @property
    def q(self) -> float:
        m = self.m
        return float(m @ m) / self.N

    @property
    def rho(self) -> tuple[float, float, float, float]:
        return self.spec.derivs(self.q)

    @property
    def n(self) -> np.ndarray:
        return F_eps(self.h_hat, self.eps, self.rho[0], self.spec.kappa)


def planted_input(N: int, fp: EpsFixedPoint, seed: int, M: int | None = None,
                  spec: RhoEpsSpec | None = None) -> PlantedInput:
    """Default generator: i.i.d. h_dot ~ N(0, psi_eps + eps), h_hat ~ N(0, q_eps + eps)."""
    M = default_M(N, fp.alpha) if M is None else M
    spec = spec or RhoEpsSpec.from_fixed_point(fp)
    # a child stream, so the planted fields never share draws with the disorder
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(1)[0]))
    h_dot = math.sqrt(fp.psi_eps + fp.eps) * rng.standard_normal(N)
    h_hat = math.sqrt(fp.q_eps + fp.eps) * rng.standard_normal(M)
    return PlantedInput(N, M, h_dot, h_hat, fp.eps, spec, seed)


def F_inverse(n: np.ndarray, eps: float, rho: float, kappa: float = 0.0, tol: float = 1e-12,
              max_iter: int = 200) -> np.ndarray:
    """Inverse of the strictly decreasing map F_{eps,rho} by safeguarded Newton."""
    n = np.asarray(n, dtype=float)
    lo = np.full_like(n, -1.0)
    hi = np.full_like(n, 1.0)
    # grow a bracket: F(lo) >= n >= F(hi)
    for _ in range(200):
        bad = F_eps(lo, eps, rho, kappa) < n
        if not bad.any():
            break
        lo[bad] *= 2.0
    for _ in range(200):
        bad = F_eps(hi, eps, rho, kappa) > n
        if not bad.any():
            break
        hi[bad] *= 2.0
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fv = F_all(x, eps, rho, kappa)
        r = fv.F - n
        lo = np.where(r > 0, x, lo)
        hi = np.where(r > 0, hi, x)
        step = x - r / fv.F1
        inside = (step > lo) & (step < hi)
        new = np.where(inside, step, 0.5 * (lo + hi))
        if np.max(np.abs(new - x)) <= tol * (1.0 + np.max(np.abs(x))):
            return new
        x = new
    return x


def _d_at(n, h_hat, eps, rho, kappa, N):
    fv = F_all(h_hat, eps, rho, kappa)
    return float(np.sum((n - fv.F) ** 2 + fv.F1)) / N


def conditional_mean(inp: PlantedInput) -> tuple[np.ndarray, float]:
    """E[G | stationarity] (times 1, not over sqrt N) and Delta(m, n)."""
    N, eps = inp.N, inp.eps
    m, n = inp.m, inp.n
    q = float(m @ m) / N
    psi = float(n @ n) / N
    rho, r1, _, _ = inp.rho
    d = _d_at(n, inp.h_hat, eps, rho, inp.spec.kappa, N)
    delta = rho - r1 * d - float(n @ inp.h_hat) / (N * (q + eps)) - float(m @ inp.h_dot) / (N * (psi + eps))
    mean = (np.outer(inp.h_hat, m) / (N * (q + eps)) + np.outer(n, inp.h_dot) / (N * (psi + eps))
            + delta * np.outer(n, m) / (N * (q + psi + eps)))
    return math.sqrt(N) * mean, delta


def _householder(u: np.ndarray) -> np.ndarray:
    """v with (I - 2 v v^T) e_1 = u / |u| (v is unit, or zero if already aligned)."""
    e = np.zeros_like(u)
    e[0] = 1.0
    v = e - u / np.linalg.norm(u)
    nv = np.linalg.norm(v)
    return v / nv if nv > 1e-300 else v


def _reflect_rows(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return A - 2.0 * np.outer(v, v @ A)


def _reflect_cols(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return A - 2.0 * np.outer(A @ v, v)


def residual_scales(inp: PlantedInput) -> np.ndarray:
    """Standard deviations of G-tilde in the (n, m)-adapted bases (rows n, columns m)."""
    N, M, eps = inp.N, inp.M, inp.eps
    m, n = inp.m, inp.n
    q = float(m @ m) / N
    psi = float(n @ n) / N
    S = np.ones((M, N))
    S[0, 0] = math.sqrt(eps / (q + psi + eps))
    S[0, 1:] = math.sqrt(eps / (psi + eps))
    S[1:, 0] = math.sqrt(eps / (q + eps))
    return S


def planted_sample(inp: PlantedInput, disorder_seed: int | None = None) -> Disorder:
    m, n = inp.m, inp.n
    if np.linalg.norm(m) == 0.0 or np.linalg.norm(n) == 0.0:
        raise DegenerateNorm("planted m and n must be nonzero")
    N, M, eps = inp.N, inp.M, inp.eps
    seed = inp.seed if disorder_seed is None else disorder_seed
    rng = np.random.Generator(np.random.PCG64(seed))
    W = rng.standard_normal((M, N)) * residual_scales(inp)
    # Gt = Q_n W Q_m with Q_n e_1 = n/|n| and Q_m e_1 = m/|m| (both symmetric reflections)
    Gt = _reflect_cols(_reflect_rows(W, _householder(n)), _householder(m))
    mean, _ = conditional_mean(inp)
    G = mean + Gt
    rho, r1, _, _ = inp.rho
    sN = math.sqrt(N)
    se = math.sqrt(eps)
    d = _d_at(n, inp.h_hat, eps, rho, inp.spec.kappa, N)
    g_hat = (inp.h_hat + rho * n - G @ m / sN) / se
    g_dot = (inp.h_dot - r1 * d * m - G.T @ n / sN) / se
    return Disorder(G, g_dot, g_hat, seed)


def verify_stationarity(d: Disorder, inp: PlantedInput) -> dict[str, float]:
    """Norms of the m- and n-gradients of the perturbed free energy at (m, n), over sqrt N."""
    gm, gn = tap_grad(inp.m, inp.n, d, inp.spec)
    sN = math.sqrt(d.N)
    return {"res_m": float(np.linalg.norm(gm)) / sN, "res_n": float(np.linalg.norm(gn)) / sN}


def stationarity_equations(d: Disorder, inp: PlantedInput) -> dict[str, float]:
    """Residuals of the two stationarity equations with h_hat recovered as F^{-1}(n)."""
    m, n = inp.m, inp.n
    N = d.N
    sN, se = math.sqrt(N), math.sqrt(inp.eps)
    rho, r1, _, _ = inp.rho
    h_hat = F_inverse(n, inp.eps, rho, inp.spec.kappa)
    dd = _d_at(n, h_hat, inp.eps, rho, inp.spec.kappa, N)
    rm = d.G @ m / sN + se * d.g_hat - h_hat - rho * n
    rn = d.G.T @ n / sN + se * d.g_dot - inp.h_dot + r1 * dd * m
    return {"eq_m": float(np.linalg.norm(rm)) / sN, "eq_n": float(np.linalg.norm(rn)) / sN}


# ---------------------------------------------------------------------------
# return home
# ---------------------------------------------------------------------------

def return_home(N: int, fp: EpsFixedPoint, k: int, seeds, spec: RhoEpsSpec | None = None) -> dict:
    """AMP on planted disorder: per-iteration distances to the planted point."""
    if k > 12:
        raise ValueError("k must be at most 12")
    seeds = list(seeds)
    dm = np.zeros((len(seeds), k + 1))
    dn = np.zeros((len(seeds), k + 1))
    ov = np.zeros((len(seeds), k + 1))
    for s_i, seed in enumerate(seeds):
        inp = planted_input(N, fp, seed, spec=spec)
        d = planted_sample(inp)
        m, n = inp.m, inp.n
        st = amp_init(d, fp)
        for j in range(k + 1):
            m_j = st.m
            st = amp_step(st, d, fp)
            dm[s_i, j] = float((m_j - m) @ (m_j - m)) / N
            dn[s_i, j] = float((st.n - n) @ (st.n - n)) / d.M
            ov[s_i, j] = float(m_j @ m) / N
    return {
        "seeds": seeds, "dist_m": dm, "dist_n": dn, "overlap": ov,
        "mean_dist_m": dm.mean(0), "mean_dist_n": dn.mean(0), "mean_overlap": ov.mean(0),
    }


# ---------------------------------------------------------------------------
# spectral edge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralQuantities:
    z_eps: float
    m_eps_at_z: float
    lambda_eps: float
    d_eps: float
    r_eps: float
    vartheta_at_m: float


def spectral_quantities(fp: EpsFixedPoint) -> SpectralQuantities:
    S = certify.setup_from_fixed_point(fp)
    z = certify.z_star(setup=S)
    v = certify.m_theta_lambda(z, setup=S)
    nd = certify._nodes(S)
    r = 1.0 / math.sqrt(float(nd.w @ (z + nd.fd) ** -2))
    return SpectralQuantities(z, v["m"], v["lambda"], S.d, r, certify.vartheta(v["m"], z, S))


def _R_operator(inp: PlantedInput, d: Disorder, penalty: float = 1e3):
    m = inp.m
    N = d.N
    rho = inp.rho[0]
    ha = d.G @ m / math.sqrt(N) + math.sqrt(inp.eps) * d.g_hat - rho * inp.n
    F1 = F_all(ha, inp.eps, rho, inp.spec.kappa).F1
    D2 = -F1 / (1.0 + rho * F1)
    D1 = 1.0 / th_eps_prime(inp.h_dot, inp.eps)
    u = m / np.linalg.norm(m)

    def mv(x):
        x = np.ravel(x)
        p = x - u * (u @ x)
        y = -D1 * p - d.G.T @ (D2 * (d.G @ p)) / N
        return y - u * (u @ y) - penalty * u * (u @ x)

    return LinearOperator((N, N), matvec=mv, dtype=float), (D1, D2, u)


def dense_R(inp: PlantedInput, d: Disorder) -> np.ndarray:
    _, (D1, D2, u) = _R_operator(inp, d)
    N = d.N
    P = np.eye(N) - np.outer(u, u)
    return P @ (-np.diag(D1) - d.G.T @ (D2[:, None] * d.G) / N) @ P


def top_eigenvalue(inp: PlantedInput, d: Disorder, tol: float = 1e-12) -> float:
    """Largest eigenvalue of R restricted to the complement of m (Lanczos)."""
    op, _ = _R_operator(inp, d)
    v0 = np.random.Generator(np.random.PCG64(0)).standard_normal(d.N)
    try:
        val = eigsh(op, k=1, which="LA", tol=tol, v0=v0, maxiter=20 * d.N)[0]
    except ArpackNoConvergence as exc:
        raise PowerIterationStall(str(exc)) from exc
    return float(val[0])


def spectral(inp: PlantedInput, d: Disorder, fp: EpsFixedPoint) -> dict:
    if d.N > 1500:
        raise ValueError("spectral check limited to N <= 1500")
    return {"edge_estimate": top_eigenvalue(inp, d), "quantities": spectral_quantities(fp)}


def vartheta_grid(fp: EpsFixedPoint, ts) -> np.ndarray:
    S = certify.setup_from_fixed_point(fp)
    return np.array([certify.vartheta(t, certify.m_inverse(t, S), S) for t in ts])
