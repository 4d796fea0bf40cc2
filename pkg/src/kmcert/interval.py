"""Validated interval arithmetic with outward rounding.

Two carriers share one kernel:

* ``Interval``: a single closed interval, pure Python arithmetic.
* ``IArray``: a numpy-backed array of intervals, used by the grid integrators.

Rounding is handled by widening every computed endpoint to the adjacent
representable double (``nextafter``).  IEEE addition, multiplication, division
and square root are correctly rounded, so one step in each direction suffices.

Elementary functions never call libm.  ``exp`` uses Cody-Waite range reduction
and a degree-13 Taylor polynomial with a Lagrange remainder; ``log`` uses the
atanh series on a mantissa reduced to [1/sqrt2, sqrt2); ``tanh``, ``cosh`` and
``sech2`` are built from ``exp``.

``ISeries`` implements truncated Taylor arithmetic over ``IArray`` coefficients.
It is the engine behind the validated Taylor quadrature in ``gaussenc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

_INF = math.inf
_MAX = 1e300
_U = 2.0**-53


class IntervalError(ArithmeticError):
    """Base class for kernel errors."""


class DivisionByZeroInterval(IntervalError):
    pass


class IntervalOverflow(IntervalError, OverflowError):
    pass


class DomainError(IntervalError, ValueError):
    pass


# ---------------------------------------------------------------------------
# float helpers
# ---------------------------------------------------------------------------

def _dn(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _adn(x):
    return np.nextafter(x, -np.inf)


def _aup(x):
    return np.nextafter(x, np.inf)


def _check_scalar(lo: float, hi: float) -> None:
    if not (abs(lo) <= _MAX and abs(hi) <= _MAX):
        if lo != lo or hi != hi:
            raise IntervalError("NaN endpoint")
        raise IntervalOverflow(f"endpoint out of range: [{lo}, {hi}]")


def _check_array(lo: np.ndarray, hi: np.ndarray) -> None:
    if lo.size == 0:
        return
    m = max(np.max(np.abs(lo)), np.max(np.abs(hi)))
    if not m <= _MAX:
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise IntervalError("NaN endpoint")
        raise IntervalOverflow("endpoint out of range")


# ---------------------------------------------------------------------------
# Interval (scalar)
# ---------------------------------------------------------------------------

Number = Union[int, float]


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval [lo, hi] with finite endpoints.

    Plain Python numbers mixed into arithmetic are treated as exact doubles.
    Decimal constants that are not representable must be passed through
    ``Interval.from_decimal`` (or ``Interval.around``) instead.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        _check_scalar(lo, hi)
        if lo > hi:
            raise ValueError(f"lo > hi: [{lo}, {hi}]")

    # construction -----------------------------------------------------
    @staticmethod
    def point(x: Number) -> "Interval":
        return Interval(x, x)

    @staticmethod
    def around(x: float, ulps: int = 1) -> "Interval":
        lo = hi = float(x)
        for _ in range(ulps):
            lo, hi = _dn(lo), _up(hi)
        return Interval(lo, hi)

    @staticmethod
    def from_decimal(s: str) -> "Interval":
        """Enclose a decimal literal (Python parsing is correctly rounded)."""
        x = float(s)
        return Interval(_dn(x), _up(x))

    @staticmethod
    def hull_of(*xs: "Interval | Number") -> "Interval":
        ivs = [_as_iv(x) for x in xs]
        return Interval(min(v.lo for v in ivs), max(v.hi for v in ivs))

    # queries ----------------------------------------------------------
    @property
    def mid(self) -> float:
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def rad(self) -> float:
        return _up(0.5 * (self.hi - self.lo))

    def contains(self, other: "Interval | Number") -> bool:
        o = _as_iv(other)
        return self.lo <= o.lo and o.hi <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def overlaps(self, other: "Interval") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def intersect(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("empty intersection")
        return Interval(lo, hi)

    def hull(self, other: "Interval | Number") -> "Interval":
        return Interval.hull_of(self, other)

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __float__(self) -> float:
        return self.mid

    # arithmetic -------------------------------------------------------
    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other):
        if isinstance(other, IArray):
            return NotImplemented
        o = _as_iv(other)
        return Interval(_dn(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, IArray):
            return NotImplemented
        o = _as_iv(other)
        return Interval(_dn(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other):
        return _as_iv(other) - self

    def __mul__(self, other):
        if isinstance(other, IArray):
            return NotImplemented
        o = _as_iv(other)
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_dn(min(p)), _up(max(p)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, IArray):
            return NotImplemented
        o = _as_iv(other)
        if o.lo <= 0.0 <= o.hi:
            raise DivisionByZeroInterval(f"0 in divisor {o}")
        p = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_dn(min(p)), _up(max(p)))

    def __rtruediv__(self, other):
        return _as_iv(other) / self

    def __pow__(self, n: int) -> "Interval":
        return pow_int(self, n)

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def sqr(self) -> "Interval":
        a = abs(self)
        return Interval(max(_dn(a.lo * a.lo), 0.0), _up(a.hi * a.hi)) if a.lo > 0 else Interval(0.0, _up(a.hi * a.hi))

    def min(self, other) -> "Interval":
        o = _as_iv(other)
        return Interval(min(self.lo, o.lo), min(self.hi, o.hi))

    def max(self, other) -> "Interval":
        o = _as_iv(other)
        return Interval(max(self.lo, o.lo), max(self.hi, o.hi))

    # order predicates (certain relations) ------------------------------
    def lt(self, other) -> bool:
        return self.hi < _as_iv(other).lo

    def le(self, other) -> bool:
        return self.hi <= _as_iv(other).lo

    def gt(self, other) -> bool:
        return self.lo > _as_iv(other).hi

    def ge(self, other) -> bool:
        return self.lo >= _as_iv(other).hi

    # elementary -------------------------------------------------------
    def exp(self) -> "Interval":
        return _scalar_from(_exp_iv(np.array([self.lo]), np.array([self.hi])))

    def log(self) -> "Interval":
        return _scalar_from(_log_iv(np.array([self.lo]), np.array([self.hi])))

    def sqrt(self) -> "Interval":
        return _scalar_from(_sqrt_iv(np.array([self.lo]), np.array([self.hi])))

    def tanh(self) -> "Interval":
        return _scalar_from(_tanh_iv(np.array([self.lo]), np.array([self.hi])))

    def cosh(self) -> "Interval":
        return _scalar_from(_cosh_iv(np.array([self.lo]), np.array([self.hi])))

    def sech2(self) -> "Interval":
        return _scalar_from(_sech2_iv(np.array([self.lo]), np.array([self.hi])))


def _as_iv(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Interval(float(x), float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Interval")


def _scalar_from(pair) -> Interval:
    lo, hi = pair
    return Interval(float(lo[0]), float(hi[0]))


# ---------------------------------------------------------------------------
# IArray (vectorised)
# ---------------------------------------------------------------------------

class IArray:
    """Array of closed intervals stored as two float arrays."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None, check: bool = True):
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
            lo, hi = lo.copy(), hi.copy()
        self.lo = lo
        self.hi = hi
        if check:
            _check_array(lo, hi)
            if np.any(lo > hi):
                raise ValueError("lo > hi in IArray")

    @staticmethod
    def of(x) -> "IArray":
        if isinstance(x, IArray):
            return x
        if isinstance(x, Interval):
            return IArray(np.array(x.lo), np.array(x.hi), check=False)
        if isinstance(x, (list, tuple)) and x and isinstance(x[0], Interval):
            return IArray([v.lo for v in x], [v.hi for v in x], check=False)
        return IArray(np.asarray(x, dtype=float))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def size(self):
        return self.lo.size

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx) -> "IArray":
        return IArray(self.lo[idx], self.hi[idx], check=False)

    def item(self, i=None) -> Interval:
        if i is None:
            return Interval(float(self.lo.reshape(-1)[0]), float(self.hi.reshape(-1)[0]))
        return Interval(float(self.lo[i]), float(self.hi[i]))

    def __repr__(self) -> str:
        return f"IArray(lo={self.lo!r}, hi={self.hi!r})"

    @property
    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        o = IArray.of(x)
        return (self.lo <= o.lo) & (o.hi <= self.hi)

    def hull(self, other) -> "IArray":
        o = IArray.of(other)
        return IArray(np.minimum(self.lo, o.lo), np.maximum(self.hi, o.hi), check=False)

    def intersect(self, other) -> "IArray":
        o = IArray.of(other)
        lo, hi = np.maximum(self.lo, o.lo), np.minimum(self.hi, o.hi)
        if np.any(lo > hi):
            raise ValueError("empty intersection")
        return IArray(lo, hi, check=False)

    def clip(self, lo: float, hi: float) -> "IArray":
        """Intersect with [lo, hi] when the true values are known to lie there."""
        return IArray(np.clip(self.lo, lo, hi), np.clip(self.hi, lo, hi), check=False)

    # arithmetic -------------------------------------------------------
    def __neg__(self):
        return IArray(-self.hi, -self.lo, check=False)

    def __add__(self, other):
        o = IArray.of(other)
        return _mk(_adn(self.lo + o.lo), _aup(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = IArray.of(other)
        return _mk(_adn(self.lo - o.hi), _aup(self.hi - o.lo))

    def __rsub__(self, other):
        return IArray.of(other) - self

    def __mul__(self, other):
        o = IArray.of(other)
        a, b, c, d = self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi
        lo = np.minimum(np.minimum(a, b), np.minimum(c, d))
        hi = np.maximum(np.maximum(a, b), np.maximum(c, d))
        return _mk(_adn(lo), _aup(hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = IArray.of(other)
        if np.any((o.lo <= 0.0) & (o.hi >= 0.0)):
            raise DivisionByZeroInterval("0 in divisor")
        a, b, c, d = self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi
        lo = np.minimum(np.minimum(a, b), np.minimum(c, d))
        hi = np.maximum(np.maximum(a, b), np.maximum(c, d))
        return _mk(_adn(lo), _aup(hi))

    def __rtruediv__(self, other):
        return IArray.of(other) / self

    def __pow__(self, n: int):
        return pow_int(self, n)

    def __abs__(self):
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        hi = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return IArray(lo, hi, check=False)

    def sqr(self) -> "IArray":
        a = abs(self)
        return _mk(np.where(a.lo > 0, np.maximum(_adn(a.lo * a.lo), 0.0), 0.0), _aup(a.hi * a.hi))

    def min(self, other) -> "IArray":
        o = IArray.of(other)
        return IArray(np.minimum(self.lo, o.lo), np.minimum(self.hi, o.hi), check=False)

    def max(self, other) -> "IArray":
        o = IArray.of(other)
        return IArray(np.maximum(self.lo, o.lo), np.maximum(self.hi, o.hi), check=False)

    # elementary -------------------------------------------------------
    def exp(self):
        return IArray(*_exp_iv(self.lo, self.hi), check=False)

    def log(self):
        return IArray(*_log_iv(self.lo, self.hi), check=False)

    def sqrt(self):
        return IArray(*_sqrt_iv(self.lo, self.hi), check=False)

    def tanh(self):
        return IArray(*_tanh_iv(self.lo, self.hi), check=False)

    def cosh(self):
        return IArray(*_cosh_iv(self.lo, self.hi), check=False)

    def sech2(self):
        return IArray(*_sech2_iv(self.lo, self.hi), check=False)

    # reductions -------------------------------------------------------
    def sum(self) -> Interval:
        return isum(self)


def _mk(lo, hi) -> IArray:
    out = IArray(lo, hi, check=False)
    _check_array(out.lo, out.hi)
    return out


def isum(a: IArray) -> Interval:
    """Enclosure of the exact sum of all intervals in ``a``.

    Uses numpy's (deterministic) pairwise summation on each endpoint and the
    a-priori bound |fl(sum) - sum| <= gamma_n * sum|x_i|, gamma_n = n u/(1-n u).
    """
    n = a.size
    if n == 0:
        return Interval(0.0, 0.0)
    lo = float(np.sum(a.lo))
    hi = float(np.sum(a.hi))
    g = n * _U / (1.0 - n * _U)
    g = 2.0 * g  # covers the rounding of the absolute sums themselves
    elo = g * float(np.sum(np.abs(a.lo)))
    ehi = g * float(np.sum(np.abs(a.hi)))
    return Interval(_dn(_dn(lo) - elo), _up(_up(hi) + ehi))


def icumsum(a: IArray) -> IArray:
    """Prefix sums with the sequential-summation error bound per prefix."""
    lo = np.cumsum(a.lo)
    hi = np.cumsum(a.hi)
    k = np.arange(1, a.size + 1, dtype=float)
    g = 2.0 * k * _U / (1.0 - k * _U)
    elo = g * np.cumsum(np.abs(a.lo))
    ehi = g * np.cumsum(np.abs(a.hi))
    return _mk(_adn(_adn(lo) - elo), _aup(_aup(hi) + ehi))


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

# Cody-Waite split: LN2_C1 has 9 significant bits, so k*LN2_C1 is exact.
_LN2_C1 = 0.693359375
_LN2_C2 = Interval.from_decimal("-2.1219444005469058276787854182343192e-4")
LN2 = Interval.from_decimal("0.69314718055994530941723212145817657")
PI = Interval.from_decimal("3.1415926535897932384626433832795029")
SQRT_2PI = Interval.from_decimal("2.5066282746310005024157652848110453")
INV_SQRT_2PI = Interval.from_decimal("0.39894228040143267793994605993438187")
LOG_SQRT_2PI = Interval.from_decimal("0.91893853320467274178032973640561764")
SQRT2 = Interval.from_decimal("1.4142135623730950488016887242096981")

_SQRT_HALF = 0.7071067811865476  # any value near 1/sqrt2 works for the split


def _coef_table(vals: Sequence[Interval]):
    return np.array([v.lo for v in vals]), np.array([v.hi for v in vals])


def _inv_factorials(n: int) -> list[Interval]:
    out = []
    f = 1
    for i in range(n + 1):
        out.append(Interval(1.0, 1.0) / Interval(float(f), float(f)))
        f *= i + 1
    return out


_EXP_DEG = 13
_INVFACT = _inv_factorials(26)
_INVFACT_LO, _INVFACT_HI = _coef_table(_INVFACT)
# e^{0.35}/14! rounded up generously; multiplies r^14 in the Lagrange remainder.
_EXP_REM = 1.7e-11
_ATANH_K = 11
_ATANH_COEF = [Interval(1.0, 1.0) / Interval(float(2 * k + 1), float(2 * k + 1)) for k in range(_ATANH_K + 1)]


# ---------------------------------------------------------------------------
# point kernels: return (lo, hi) enclosures of f at float points x
# ---------------------------------------------------------------------------

def _mul_pts(alo, ahi, blo, bhi):
    a, b, c, d = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    lo = np.minimum(np.minimum(a, b), np.minimum(c, d))
    hi = np.maximum(np.maximum(a, b), np.maximum(c, d))
    return _adn(lo), _aup(hi)


def _horner(rlo, rhi, clo, chi):
    """Interval Horner evaluation of sum c_i r^i (coefficients low to high)."""
    plo = np.full_like(rlo, clo[-1])
    phi = np.full_like(rhi, chi[-1])
    for i in range(len(clo) - 2, -1, -1):
        plo, phi = _mul_pts(plo, phi, rlo, rhi)
        plo, phi = _adn(plo + clo[i]), _aup(phi + chi[i])
    return plo, phi


def exp_points(x: np.ndarray):
    """Verified enclosure of exp at each float in ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size and np.max(x) > 690.0:
        raise IntervalOverflow("exp argument too large")
    xc = np.maximum(x, -745.5)
    k = np.rint(xc / 0.6931471805599453)
    # r = x - k*ln2 = (x - k*C1) - k*C2
    t = xc - k * _LN2_C1  # k*C1 exact; subtraction rounded
    tlo, thi = _adn(t), _aup(t)
    c2lo, c2hi = _mul_pts(k, k, np.full_like(k, _LN2_C2.lo), np.full_like(k, _LN2_C2.hi))
    rlo, rhi = _adn(tlo - c2hi), _aup(thi - c2lo)
    plo, phi = _horner(rlo, rhi, _INVFACT_LO[: _EXP_DEG + 1], _INVFACT_HI[: _EXP_DEG + 1])
    rmax = np.maximum(np.abs(rlo), np.abs(rhi))
    rem = _aup(rmax**14 * _EXP_REM)
    phi = _aup(phi + rem)
    ki = k.astype(np.int64)
    lo = np.ldexp(plo, ki)
    hi = np.ldexp(phi, ki)
    tiny = hi < 1e-300
    if np.any(tiny):
        lo = np.where(tiny, np.maximum(_adn(lo), 0.0), lo)
        hi = np.where(tiny, _aup(hi), hi)
    under = x < -745.5
    if np.any(under):
        lo = np.where(under, 0.0, lo)
        hi = np.where(under, 5e-324, hi)
    return np.maximum(lo, 0.0), hi


def expm1_small_points(x: np.ndarray):
    """Enclosure of exp(x)-1 for |x| <= 1 via the Taylor series without the constant term."""
    x = np.asarray(x, dtype=float)
    deg = 22
    clo, chi = _INVFACT_LO[1 : deg + 1], _INVFACT_HI[1 : deg + 1]
    plo, phi = _horner(x, x, clo, chi)  # sum_{i>=1} x^{i-1}/i!
    plo, phi = _mul_pts(plo, phi, x, x)
    rem = _aup(np.abs(x) ** (deg + 1) * 2.0e-22)  # e/23! < 1.1e-22
    return _adn(plo - rem), _aup(phi + rem)


def log_points(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("log of non-positive value")
    m, e = np.frexp(x)
    small = m < _SQRT_HALF
    m = np.where(small, 2.0 * m, m)
    e = np.where(small, e - 1, e).astype(float)
    num = m - 1.0  # exact (Sterbenz)
    dlo, dhi = _adn(m + 1.0), _aup(m + 1.0)
    tlo = _adn(np.minimum(num / dlo, num / dhi))
    thi = _aup(np.maximum(num / dlo, num / dhi))
    t2lo, t2hi = _mul_pts(tlo, thi, tlo, thi)
    t2lo = np.maximum(t2lo, 0.0)
    clo = np.array([c.lo for c in _ATANH_COEF])
    chi = np.array([c.hi for c in _ATANH_COEF])
    slo, shi = _horner(t2lo, t2hi, clo, chi)
    slo, shi = _mul_pts(slo, shi, tlo, thi)
    tmax = np.maximum(np.abs(tlo), np.abs(thi))
    n = 2 * _ATANH_K + 3
    rem = _aup(tmax**n / (n * (1.0 - 0.03)))
    slo, shi = _adn(slo - rem), _aup(shi + rem)
    slo, shi = _adn(2.0 * slo), _aup(2.0 * shi)  # doubling is exact; keep symmetric widening
    elo, ehi = _mul_pts(e, e, np.full_like(e, LN2.lo), np.full_like(e, LN2.hi))
    return _adn(slo + elo), _aup(shi + ehi)


def tanh_points(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    lo = np.empty_like(a)
    hi = np.empty_like(a)
    sm = a < 0.5
    if np.any(sm):
        ulo, uhi = expm1_small_points(2.0 * a[sm])
        # u/(u+2), increasing in u
        lo[sm] = _adn(ulo / _aup(ulo + 2.0))
        hi[sm] = _aup(uhi / _adn(uhi + 2.0))
    big = a > 300.0
    mid = ~sm & ~big
    if np.any(mid):
        Elo, Ehi = exp_points(2.0 * a[mid])
        # 1 - 2/(1+E), increasing in E
        lo[mid] = _adn(1.0 - _aup(2.0 / _adn(1.0 + Elo)))
        hi[mid] = _aup(1.0 - _adn(2.0 / _aup(1.0 + Ehi)))
    if np.any(big):
        lo[big] = math.nextafter(1.0, 0.0)
        hi[big] = 1.0
    lo = np.maximum(lo, 0.0)
    hi = np.minimum(hi, 1.0)
    neg = x < 0
    return np.where(neg, -hi, lo), np.where(neg, -lo, hi)


def cosh_points(x: np.ndarray):
    a = np.abs(np.asarray(x, dtype=float))
    Elo, Ehi = exp_points(a)
    ilo, ihi = _adn(1.0 / Ehi), _aup(1.0 / Elo)
    lo = _adn(0.5 * _adn(Elo + ilo))
    hi = _aup(0.5 * _aup(Ehi + ihi))
    return np.maximum(lo, 1.0), hi


# ---------------------------------------------------------------------------
# interval kernels (monotonicity-based)
# ---------------------------------------------------------------------------

def _exp_iv(lo, hi):
    l, _ = exp_points(lo)
    _, h = exp_points(hi)
    return l, h


def _log_iv(lo, hi):
    if np.any(~(lo > 0)):
        raise DomainError("log of interval containing non-positive values")
    l, _ = log_points(lo)
    _, h = log_points(hi)
    return l, h


def _sqrt_iv(lo, hi):
    if np.any(lo < 0):
        raise DomainError("sqrt of negative values")
    return np.maximum(_adn(np.sqrt(lo)), 0.0), _aup(np.sqrt(hi))


def _tanh_iv(lo, hi):
    l, _ = tanh_points(lo)
    _, h = tanh_points(hi)
    return l, h


def _abs_range(lo, hi):
    alo = np.where(lo >= 0, lo, np.where(hi <= 0, -hi, 0.0))
    ahi = np.maximum(np.abs(lo), np.abs(hi))
    return alo, ahi


def _cosh_iv(lo, hi):
    alo, ahi = _abs_range(lo, hi)
    l, _ = cosh_points(alo)
    _, h = cosh_points(ahi)
    return l, h


def _sech2_iv(lo, hi):
    clo, chi = _cosh_iv(lo, hi)
    c2lo, c2hi = _adn(clo * clo), _aup(chi * chi)
    return np.maximum(_adn(1.0 / c2hi), 0.0), np.minimum(_aup(1.0 / c2lo), 1.0)


# ---------------------------------------------------------------------------
# generic dispatch (the Scalar abstraction)
# ---------------------------------------------------------------------------

def is_interval(x) -> bool:
    return isinstance(x, (Interval, IArray))


def exp(x):
    return x.exp() if is_interval(x) else np.exp(x)


def log(x):
    return x.log() if is_interval(x) else np.log(x)


def sqrt(x):
    return x.sqrt() if is_interval(x) else np.sqrt(x)


def tanh(x):
    return x.tanh() if is_interval(x) else np.tanh(x)


def cosh(x):
    return x.cosh() if is_interval(x) else np.cosh(x)


def sech2(x):
    if is_interval(x):
        return x.sech2()
    c = np.cosh(x)
    return 1.0 / (c * c)


def sqr(x):
    return x.sqr() if is_interval(x) else x * x


def pow_int(x, n: int):
    """x**n for integer n >= 0 with sign-aware enclosure."""
    if n < 0:
        raise ValueError("negative powers: use 1/pow_int(x, -n)")
    if not is_interval(x):
        return x**n
    if n == 0:
        return Interval(1.0, 1.0) if isinstance(x, Interval) else IArray(np.ones_like(x.lo))
    if n == 1:
        return x
    scalar = isinstance(x, Interval)
    xa = IArray.of(x)

    def pw(lo_pts, hi_pts):
        plo, phi = lo_pts.copy(), hi_pts.copy()
        blo, bhi = lo_pts.copy(), hi_pts.copy()
        rlo = np.ones_like(plo)
        rhi = np.ones_like(phi)
        k = n
        first = True
        while k:
            if k & 1:
                if first:
                    rlo, rhi = blo.copy(), bhi.copy()
                    first = False
                else:
                    rlo, rhi = _mul_pts(rlo, rhi, blo, bhi)
            k >>= 1
            if k:
                blo, bhi = _mul_pts(blo, bhi, blo, bhi)
        return rlo, rhi

    if n % 2 == 0:
        alo, ahi = _abs_range(xa.lo, xa.hi)
        lo, _ = pw(alo, alo)
        _, hi = pw(ahi, ahi)
        lo = np.maximum(lo, 0.0)
    else:
        lo, _ = pw(xa.lo, xa.lo)
        _, hi = pw(xa.hi, xa.hi)
    out = _mk(lo, hi)
    return out.item() if scalar else out


def const(c: Interval, like):
    """Return constant ``c`` in the realisation of ``like`` (Interval or float)."""
    return c if is_interval(like) else c.mid


def to_interval(x) -> Interval:
    return _as_iv(x)


# ---------------------------------------------------------------------------
# Taylor series over interval coefficients
# ---------------------------------------------------------------------------

class ISeries:
    """Truncated Taylor series sum_k c_k t^k with IArray coefficients.

    All coefficient arrays share one shape (one entry per expansion point).
    When the expansion point is an interval X, coefficient k encloses
    f^(k)(xi)/k! for every xi in X, which is what the quadrature remainder needs.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs: Sequence[IArray]):
        self.c = list(coeffs)

    @property
    def order(self) -> int:
        return len(self.c) - 1

    @staticmethod
    def variable(center: IArray, order: int) -> "ISeries":
        z = IArray(np.zeros_like(center.lo))
        o = IArray(np.ones_like(center.lo))
        return ISeries([center, o] + [z] * (order - 1))

    @staticmethod
    def constant(v, like: "ISeries") -> "ISeries":
        z = IArray(np.zeros_like(like.c[0].lo))
        v = z + v
        return ISeries([v] + [z] * like.order)

    def __add__(self, other):
        if isinstance(other, ISeries):
            return ISeries([a + b for a, b in zip(self.c, other.c)])
        return ISeries([self.c[0] + other] + self.c[1:])

    __radd__ = __add__

    def __neg__(self):
        return ISeries([-a for a in self.c])

    def __sub__(self, other):
        if isinstance(other, ISeries):
            return ISeries([a - b for a, b in zip(self.c, other.c)])
        return ISeries([self.c[0] - other] + self.c[1:])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ISeries):
            return ISeries([a * other for a in self.c])
        n = self.order
        out = []
        for k in range(n + 1):
            acc = self.c[0] * other.c[k]
            for j in range(1, k + 1):
                acc = acc + self.c[j] * other.c[k - j]
            out.append(acc)
        return ISeries(out)

    __rmul__ = __mul__

    def sqr(self):
        return self * self

    def exp(self) -> "ISeries":
        a = self.c
        e = [a[0].exp()]
        for k in range(1, self.order + 1):
            acc = a[1] * e[k - 1]
            for j in range(2, k + 1):
                acc = acc + (a[j] * float(j)) * e[k - j]
            e.append(acc / float(k))
        return ISeries(e)

    def recip(self) -> "ISeries":
        a = self.c
        b0 = 1.0 / a[0]
        b = [b0]
        for k in range(1, self.order + 1):
            acc = a[1] * b[k - 1]
            for j in range(2, k + 1):
                acc = acc + a[j] * b[k - j]
            b.append(-(b0 * acc))
        return ISeries(b)

    def __truediv__(self, other):
        if isinstance(other, ISeries):
            return self * other.recip()
        return ISeries([a / other for a in self.c])

    def __rtruediv__(self, other):
        return self.recip() * other

    def log(self) -> "ISeries":
        a = self.c
        l = [a[0].log()]
        inv0 = 1.0 / a[0]
        for k in range(1, self.order + 1):
            acc = a[k]
            for j in range(1, k):
                acc = acc - (l[j] * (float(j) / k)) * a[k - j]
            l.append(acc * inv0)
        return ISeries(l)

    def tanh(self) -> "ISeries":
        # 1 - 2/(1 + e^{2u}); fine for the moderate arguments met in quadrature
        return 1.0 - 2.0 * (1.0 + (self * 2.0).exp()).recip()

    def cosh(self) -> "ISeries":
        return 0.5 * (self.exp() + (-self).exp())

    def integrate_cell(self, r: float, remainder: IArray) -> IArray:
        """Integral over [c-r, c+r] of the series expanded at the cell centre c.

        ``remainder`` encloses the next Taylor coefficient over the whole cell;
        ``self.order + 1`` must be even.
        """
        n1 = self.order + 1
        if n1 % 2:
            raise ValueError("remainder order must be even")
        acc = None
        for k in range(0, n1, 2):
            w = _int_weight(r, k)
            term = self.c[k] * w
            acc = term if acc is None else acc + term
        return acc + remainder * _int_weight(r, n1)


def _int_weight(r: float, k: int) -> Interval:
    """Enclosure of the integral of t^k over [-r, r] (k even)."""
    rr = Interval(r, r)
    return pow_int(rr, k + 1) * 2.0 / Interval(float(k + 1), float(k + 1))
