import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kmcert import interval as iv
from kmcert.interval import (DivisionByZeroInterval, DomainError, IArray, Interval, IntervalError,
                             IntervalOverflow)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
small = st.floats(min_value=-30.0, max_value=30.0, allow_nan=False)


def ulp(x):
    return math.ulp(x)


def test_add_example():
    r = Interval(1, 2) + Interval(3, 4)
    assert r.contains(Interval(4, 6))
    assert r.lo >= 4 - ulp(4) and r.hi <= 6 + ulp(6)


def test_mul_mixed_signs():
    # the exact range is [-6, 8]; any enclosure inside [-8, 8] is acceptable
    r = Interval(-1, 2) * Interval(-3, 4)
    assert r.contains(Interval(-6, 8))
    assert Interval(-8, 8).contains(Interval(r.lo + ulp(6), r.hi - ulp(8)))


def test_div_half():
    r = Interval(1, 1) / Interval(2, 2)
    assert 0.5 in r
    assert r.width <= 2 * ulp(0.5)


def test_division_by_interval_containing_zero():
    with pytest.raises(DivisionByZeroInterval):
        Interval(1, 1) / Interval(-1, 1)


def test_overflow_is_an_error():
    with pytest.raises(IntervalOverflow):
        Interval(1e200, 1e200) * Interval(1e200, 1e200)


def test_domain_errors():
    with pytest.raises(DomainError):
        Interval(-1, 1).log()
    with pytest.raises(DomainError):
        Interval(-2, -1).sqrt()


def test_elementary_at_zero():
    e = Interval.point(0).exp()
    assert 1.0 in e and e.width <= 4 * ulp(1.0)
    assert 0.0 in Interval.point(0).tanh()
    assert 1.0 in Interval.point(0).cosh()
    assert 1.0 in Interval.point(0).sech2()


def test_contains_and_width():
    assert Interval(0, 1).contains(Interval(0.2, 0.3))
    assert not Interval(0, 1).contains(Interval(0.5, 1.5))
    assert Interval(4, 6).width == 2


def test_from_decimal_encloses_the_literal():
    from fractions import Fraction
    x = Interval.from_decimal("0.1")
    assert Fraction(x.lo) <= Fraction(1, 10) <= Fraction(x.hi)


def test_reject_inverted_and_nonfinite():
    with pytest.raises(ValueError):
        Interval(2, 1)
    with pytest.raises(IntervalError):
        Interval(0, math.inf)


def test_pi_enclosure():
    assert math.pi in iv.PI and iv.PI.width < 1e-15


@settings(max_examples=300, deadline=None)
@given(finite, finite)
def test_point_arith_containment(x, y):
    # endpoints beyond the finite range raise by design, so keep quotients bounded
    assume(y == 0 or abs(y) > 1e-290)
    X, Y = Interval.point(x), Interval.point(y)
    assert (X + Y).contains(x + y)
    assert (X - Y).contains(x - y)
    assert (X * Y).contains(x * y)
    if y != 0:
        assert (X / Y).contains(x / y)


def _nested(a, b, c, d):
    lo, hi = sorted((a, b))
    lo2, hi2 = lo - abs(c), hi + abs(d)
    return Interval(lo, hi), Interval(lo2, hi2)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, finite, st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_inclusion_monotonicity(a, b, c, d, e1, e2, e3, e4):
    A, A2 = _nested(a, b, e1, e2)
    B, B2 = _nested(c, d, e3, e4)
    assume(B2.lo > 1e-290 or B2.hi < -1e-290 or B2.lo <= 0 <= B2.hi)
    for f in (lambda u, v: u + v, lambda u, v: u - v, lambda u, v: u * v,
              lambda u, v: u.min(v), lambda u, v: u.max(v), lambda u, v: u.hull(v)):
        assert f(A2, B2).contains(f(A, B))
    if not (B2.lo <= 0 <= B2.hi):
        assert (A2 / B2).contains(A / B)


@settings(max_examples=300, deadline=None)
@given(small, small, st.floats(0, 3), st.floats(0, 3))
def test_inclusion_monotonicity_elementary(a, b, e1, e2):
    A, A2 = _nested(a, b, e1, e2)
    for name in ("exp", "tanh", "cosh", "sech2", "sqr", "__abs__"):
        assert getattr(A2, name)().contains(getattr(A, name)())
    P = Interval(abs(a) + 1e-3, abs(a) + 1e-3 + abs(b))
    P2 = Interval(P.lo / (1 + e1), P.hi * (1 + e2))
    assert P2.log().contains(P.log())
    assert P2.sqrt().contains(P.sqrt())


@settings(max_examples=500, deadline=None)
@given(st.floats(min_value=-50, max_value=50))
def test_exp_width_sanity(x):
    e = Interval.point(x).exp()
    v = math.exp(x)
    assert v in e
    assert e.width <= 16 * ulp(v)


def test_pow_int_sign_aware():
    r = iv.pow_int(Interval(-2, 1), 2)
    assert r.contains(Interval(0, 4)) and r.lo >= -1e-300
    r3 = iv.pow_int(Interval(-2, 1), 3)
    assert r3.contains(Interval(-8, 1))


def test_iarray_sum_encloses_exact_sum():
    from fractions import Fraction
    rng = np.random.default_rng(3)
    x = rng.standard_normal(1000)
    s = IArray(x, x).sum()
    exact = sum(Fraction(v) for v in x)
    assert Fraction(s.lo) <= exact <= Fraction(s.hi)


def test_randomized_containment_smoke():
    rng = np.random.default_rng(11)
    x = rng.uniform(-20, 20, 20000)
    y = rng.uniform(0.1, 20, 20000)
    X, Y = IArray(x, x), IArray(y, y)
    for got, want in ((X + Y, x + y), (X * Y, x * y), (X / Y, x / y), (X.exp(), np.exp(x)),
                      (X.tanh(), np.tanh(x)), (Y.log(), np.log(y)), (Y.sqrt(), np.sqrt(y))):
        assert got.contains(want).all()
