"""Gaussian expectation engines.

* ``enclose_gauss_expectation``: rigorous cell sums for monotone integrands,
  with an analytic tail bound.  Each cell contributes f(worst endpoint) times an
  enclosure of P(Z in cell).
* ``enclose_gauss_taylor``: validated Taylor quadrature for smooth integrands
  given as ``ISeries`` maps; used where cell sums are far too coarse.
* ``quad_gauss`` / ``quad_gauss2``: double-precision workhorses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import interval as iv
from .interval import IArray, Interval, ISeries
from .specfun import phi


class SpecMismatch(ValueError):
    """A monotonicity probe contradicted the declared MonotoneSpec."""


class NonConvergence(RuntimeError):
    pass


class BadCovariance(ValueError):
    pass


TAIL_KINDS = ("bounded_by_one", "cauchy_schwarz_poly", "linear_growth", "logpsi_growth")
DIRECTIONS = ("increasing", "decreasing", "even_increasing", "even_decreasing", "piecewise")


@dataclass(frozen=True)
class GridSpec:
    L: float = 8.0
    delta: float = 1e-3
    tail_kind: str = "bounded_by_one"

    def __post_init__(self):
        if self.tail_kind not in TAIL_KINDS:
            raise ValueError(f"unknown tail kind {self.tail_kind}")
        if not (0 < self.delta <= 1e-3 + 1e-15):
            raise ValueError("delta must lie in (0, 1e-3]")
        J = self.L / self.delta
        if abs(J - round(J)) > 1e-6:
            raise ValueError("L/delta must be an integer")

    @property
    def J(self) -> int:
        return int(round(self.L / self.delta))


@dataclass(frozen=True)
class MonotoneSpec:
    """How the integrand y -> f(y) behaves.

    ``tail`` holds the parameters of the tail majorant:
    bounded_by_one -> {"B": bound on |f|}; cauchy_schwarz_poly -> {"p": p} for
    |f(y)| <= (1+|y|)^p; linear_growth -> {"a": a, "b": b} for |f(y)| <= a|y|+b;
    logpsi_growth -> {} for |f(y)| <= y^2/2 + log(1+|y|) + 2.
    """

    direction: str = "increasing"
    split_points: tuple = ()
    piece_directions: tuple = ()
    nonnegative: bool = False
    tail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction}")
        if list(self.split_points) != sorted(self.split_points):
            raise ValueError("split points must be sorted")
        if self.direction == "piecewise" and len(self.piece_directions) != len(self.split_points) + 1:
            raise ValueError("piecewise needs one direction per piece")


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

def _double_factorial_odd(n: int) -> int:
    out = 1
    for k in range(1, n + 1, 2):
        out *= k
    return out


def tail_bound(kind: str, L: float, sigma_hi: float, params: dict) -> Interval:
    """Upper bound on E[|f(sigma Z)| 1{|Z| >= L}] for the given majorant."""
    Li = Interval(L, L)
    s = Interval(sigma_hi, sigma_hi)
    e2 = (-0.5 * Li.sqr()).exp()
    if kind == "bounded_by_one":
        B = params.get("B", 1.0)
        return 2.0 * e2 * B
    if kind == "cauchy_schwarz_poly":
        p = int(params["p"])
        m = Interval(float(_double_factorial_odd(2 * p - 1)), float(_double_factorial_odd(2 * p - 1)))
        inner = 1.0 + iv.pow_int(s, 2 * p) * m
        return float(2**p) * inner.sqrt() * (-0.25 * Li.sqr()).exp()
    if kind == "linear_growth":
        a, b = params["a"], params["b"]
        return 2.0 * (a * s * (Li + 1.0) + b) * e2
    if kind == "logpsi_growth":
        ph = phi(Li)
        Ps = ph / Li  # Psi(L) <= phi(L)/L
        return s.sqr() * (Li * ph + Ps) + 2.0 * s * ph + 4.0 * Ps
    raise ValueError(kind)


def _tail_interval(T: Interval, nonnegative: bool) -> Interval:
    return Interval(0.0, T.hi) if nonnegative else Interval(-T.hi, T.hi)


# ---------------------------------------------------------------------------
# monotone cell sums
# ---------------------------------------------------------------------------

def _grid(grid: GridSpec) -> np.ndarray:
    J = grid.J
    return np.arange(-J, J + 1, dtype=float) * grid.delta


def cell_probabilities(x: np.ndarray) -> IArray:
    """Enclosure of P(Z in [x_j, x_{j+1}]) by width times min/max density."""
    a, b = IArray(x[:-1]), IArray(x[1:])
    w = b - a
    pa, pb = phi(a), phi(b)
    pmin = IArray(np.minimum(pa.lo, pb.lo), np.minimum(pa.hi, pb.hi), check=False)
    pmax = IArray(np.maximum(pa.lo, pb.lo), np.maximum(pa.hi, pb.hi), check=False)
    return IArray((w * pmin).lo, (w * pmax).hi, check=False)


def _cell_ranges(f: Callable, args: IArray, spec: MonotoneSpec) -> IArray:
    """Enclose f over each argument interval using the declared monotonicity."""
    d = spec.direction
    if d == "increasing":
        return IArray(f(IArray(args.lo)).lo, f(IArray(args.hi)).hi, check=False)
    if d == "decreasing":
        return IArray(f(IArray(args.hi)).lo, f(IArray(args.lo)).hi, check=False)
    if d in ("even_increasing", "even_decreasing"):
        a = abs(args)
        near, far = f(IArray(a.lo)), f(IArray(a.hi))
        if d == "even_increasing":
            return IArray(near.lo, far.hi, check=False)
        return IArray(far.lo, near.hi, check=False)
    # piecewise: cells are split at the split points beforehand
    lo = np.empty_like(args.lo)
    hi = np.empty_like(args.hi)
    edges = [-np.inf, *spec.split_points, np.inf]
    mid = args.mid
    for k, dk in enumerate(spec.piece_directions):
        m = (mid >= edges[k]) & (mid < edges[k + 1])
        if not np.any(m):
            continue
        sub = _cell_ranges(f, args[m], MonotoneSpec(direction=dk))
        lo[m], hi[m] = sub.lo, sub.hi
    return IArray(lo, hi, check=False)


def probe_monotonicity(f_double: Callable, spec: MonotoneSpec, lo: float, hi: float, n: int = 2001) -> None:
    """Sample-based sanity check of a MonotoneSpec (raises SpecMismatch)."""
    y = np.linspace(lo, hi, n)
    v = np.asarray(f_double(y), dtype=float)
    tol = 1e-12 * (1.0 + np.max(np.abs(v)))
    d = spec.direction
    if d == "increasing":
        bad = np.any(np.diff(v) < -tol)
    elif d == "decreasing":
        bad = np.any(np.diff(v) > tol)
    elif d in ("even_increasing", "even_decreasing"):
        yy = np.linspace(0, max(abs(lo), abs(hi)), n)
        vp = np.asarray(f_double(yy), dtype=float)
        vm = np.asarray(f_double(-yy), dtype=float)
        sym = np.any(np.abs(vp - vm) > 1e-9 * (1 + np.abs(vp)))
        dv = np.diff(vp)
        mono = np.any(dv < -tol) if d == "even_increasing" else np.any(dv > tol)
        bad = sym or mono
    else:
        bad = False
    if bad:
        raise SpecMismatch(f"sampled values contradict direction '{d}'")


def enclose_gauss_expectation(
    f: Callable[[IArray], IArray],
    sigma2,
    grid: GridSpec,
    spec: MonotoneSpec,
    f_double: Callable | None = None,
    include_tail: bool = True,
) -> Interval:
    """Interval containing E[f(sigma Z)] for every sigma^2 in ``sigma2``.

    ``f`` maps an IArray of points to an IArray enclosing f at those points.
    On each cell [x_j, x_{j+1}] the argument ranges over sigma*[x_j, x_{j+1}],
    bounded through the declared monotonicity, and the cell probability is
    enclosed by width times the min/max density.  The pieces beyond +-L are
    bounded by the majorant selected by ``grid.tail_kind``.
    """
    s2 = iv.to_interval(sigma2) if not isinstance(sigma2, Interval) else sigma2
    sigma = s2.sqrt()
    if f_double is not None:
        probe_monotonicity(f_double, spec, -sigma.hi * grid.L, sigma.hi * grid.L)
    x = _grid(grid)
    if spec.direction == "piecewise" and spec.split_points:
        # split cells at the split points (expressed in the argument variable)
        extra = [p / sigma.mid for p in spec.split_points if -grid.L < p / sigma.mid < grid.L]
        x = np.unique(np.concatenate([x, np.array(extra)]))
    args = IArray(x[:-1]) * sigma
    args = args.hull(IArray(x[1:]) * sigma)
    fr = _cell_ranges(f, args, spec)
    if spec.nonnegative:
        fr = IArray(np.maximum(fr.lo, 0.0), fr.hi, check=False)
    P = cell_probabilities(x)
    total = iv.isum(fr * P)
    if include_tail:
        T = tail_bound(grid.tail_kind, min(-x[0], x[-1]), sigma.hi, spec.tail)
        total = total + _tail_interval(T, spec.nonnegative)
    return total


# ---------------------------------------------------------------------------
# validated Taylor quadrature
# ---------------------------------------------------------------------------

def enclose_gauss_taylor(
    series_fn: Callable[[ISeries], ISeries],
    L: float = 10.0,
    cell: float = 2.0**-4,
    order: int = 12,
    tail: Interval | None = None,
    nonnegative: bool = False,
) -> Interval:
    """Interval containing E[g(Z)] where ``series_fn`` builds the Taylor series of g.

    The integral of g*phi over [-L, L] is computed cell by cell: coefficients
    0..order-1 at the (exact) cell centre, coefficient ``order`` over the whole
    cell as the Lagrange remainder.  ``tail`` encloses E[g(Z) 1{|Z|>L}].
    """
    if order % 2:
        raise ValueError("order must be even")
    n = int(round(2 * L / cell))
    if abs(n * cell - 2 * L) > 0:
        raise ValueError("2L must be a multiple of the cell width")
    r = 0.5 * cell
    lo = -L + cell * np.arange(n, dtype=float)
    hi = lo + cell
    c = lo + r
    x_pt = ISeries.variable(IArray(c), order - 1)
    x_iv = ISeries.variable(IArray(lo, hi), order)

    def integrand(xs: ISeries) -> ISeries:
        dens = (xs.sqr() * -0.5).exp() * iv.INV_SQRT_2PI
        return series_fn(xs) * dens

    s_pt = integrand(x_pt)
    s_iv = integrand(x_iv)
    cells = s_pt.integrate_cell(r, s_iv.c[order])
    total = iv.isum(cells)
    if tail is not None:
        total = total + tail
    elif nonnegative:
        pass
    return total


# ---------------------------------------------------------------------------
# double precision quadrature
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _composite_nodes(L: float, panels: int, per: int = 20):
    t, w = _gl(per)
    edges = np.linspace(-L, L, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mids = 0.5 * (edges[1:] + edges[:-1])
    x = (mids[:, None] + half[:, None] * t[None, :]).ravel()
    wx = (half[:, None] * w[None, :]).ravel()
    return x, wx * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def quad_gauss(f: Callable, sigma2: float = 1.0, tol: float = 1e-10, L: float = 13.0, max_panels: int = 4096) -> float:
    """E[f(sigma Z)] by composite Gauss-Legendre on [-L, L] with panel doubling.

    The error is estimated by the difference between successive refinements.
    """
    sigma = math.sqrt(sigma2)
    panels = 16
    prev = None
    while panels <= max_panels:
        x, w = _composite_nodes(L, panels)
        val = float(np.dot(w, f(sigma * x)))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
        panels *= 2
    raise NonConvergence("quad_gauss refinement stalled")


class GaussRule:
    """Fixed composite Gauss-Legendre rule for E[f(sigma Z)] (vectorised reuse)."""

    def __init__(self, L: float = 11.0, panels: int = 64, per: int = 20):
        self.x, self.w = _composite_nodes(L, panels, per)

    def expect(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.w, axes=([axis], [0]))


def _hermite(n: int):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2.0 * math.pi)


def quad_gauss2(f: Callable, cov, tol: float = 1e-10, n0: int = 48, max_n: int = 768) -> float:
    """E[f(X, Y)] for (X, Y) centred Gaussian with covariance ``cov``.

    The pair is whitened (X = a Z1, Y = b Z1 + c Z2) and integrated with a
    tensor Gauss-Hermite rule whose size doubles until successive values agree.
    """
    C = np.asarray(cov, dtype=float)
    if C.shape != (2, 2) or abs(C[0, 1] - C[1, 0]) > 1e-12:
        raise BadCovariance("covariance must be a symmetric 2x2 matrix")
    ev = np.linalg.eigvalsh(C)
    if ev[0] < -1e-12:
        raise BadCovariance("covariance is not positive semidefinite")
    swap = C[0, 0] <= 0.0
    if swap:
        C = C[::-1, ::-1]
    a = math.sqrt(max(C[0, 0], 0.0))
    b = C[0, 1] / a if a > 0 else 0.0
    c = math.sqrt(max(C[1, 1] - b * b, 0.0))
    n = n0
    prev = None
    while n <= max_n:
        z, w = _hermite(n)
        Z1, Z2 = np.meshgrid(z, z, indexing="ij")
        W = np.outer(w, w)
        X, Y = a * Z1, b * Z1 + c * Z2
        vals = f(Y, X) if swap else f(X, Y)
        val = float(np.sum(W * vals))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
        n *= 2
    raise NonConvergence("quad_gauss2 refinement stalled")
