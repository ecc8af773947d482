import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisecert import interval as ia
from noisecert.interval import DomainError, Interval, IntervalArray

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-6, 1e6)


def iv(a, b):
    return Interval(min(a, b), max(a, b))


def test_basic_examples():
    assert Interval(1, 1) + Interval(2, 2) == Interval(3, 3)
    assert Interval(-1, 2) * Interval(3, 3) == Interval(-3, 6)
    with pytest.raises(DomainError):
        Interval(1, 2) / Interval(0, 1)


def test_invalid_endpoints():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    with pytest.raises(ValueError):
        Interval(math.nan, 1.0)


def test_elementary_examples():
    assert ia.exp(Interval(0, 0)) == Interval(1, 1)
    assert ia.cbrt(Interval(-8, -8)) == Interval(-2, -2)
    v = ia.pow_int(Interval(3, 3) / ia.exp(Interval(1, 1)), 19)
    assert 6.51 < v.lo and v.hi < 7
    assert v.contains(float(mpmath.mpf(3) ** 19 / mpmath.e ** 19))


def test_log_domain():
    with pytest.raises(DomainError):
        ia.log(Interval(0.0, 1.0))
    with pytest.raises(DomainError):
        ia.pow_frac(Interval(-1.0, 1.0), -2, 3)


def test_decimal_parsing_encloses_literal():
    x = ia.parse_decimal("0.1")
    assert x.lo < x.hi or x.lo == x.hi
    assert mpmath.mpf(x.lo) <= mpmath.mpf("0.1") <= mpmath.mpf(x.hi)


@given(finite, finite, finite, finite)
def test_arithmetic_contains_exact(a, b, c, d):
    X, Y = iv(a, b), iv(c, d)
    with mpmath.workdps(60):
        for op, f in ((lambda p, q: p + q, Interval.__add__), (lambda p, q: p - q, Interval.__sub__),
                      (lambda p, q: p * q, Interval.__mul__)):
            R = f(X, Y)
            for p in (X.lo, X.hi):
                for q in (Y.lo, Y.hi):
                    exact = op(mpmath.mpf(p), mpmath.mpf(q))
                    assert mpmath.mpf(R.lo) <= exact <= mpmath.mpf(R.hi)


@given(finite, finite, positive)
def test_division_contains_exact(a, b, c):
    X, Y = iv(a, b), Interval(c, c)
    R = X / Y
    with mpmath.workdps(60):
        for p in (X.lo, X.hi):
            exact = mpmath.mpf(p) / mpmath.mpf(c)
            assert mpmath.mpf(R.lo) <= exact <= mpmath.mpf(R.hi)


@given(st.floats(-50, 50), st.floats(1e-8, 1e8), st.floats(-1e4, 1e4))
def test_elementary_contain_extended_precision(x, y, z):
    with mpmath.workdps(50):
        for R, exact in ((ia.exp(Interval(x, x)), mpmath.exp(x)),
                         (ia.log(Interval(y, y)), mpmath.log(y)),
                         (ia.cbrt(Interval(z, z)), mpmath.sign(z) * mpmath.cbrt(abs(mpmath.mpf(z)))),
                         (ia.sqrt(Interval(y, y)), mpmath.sqrt(y))):
            assert mpmath.mpf(R.lo) <= exact <= mpmath.mpf(R.hi)


def _ulps_between(a: float, b: float) -> int:
    n = 0
    while a < b and n < 100:
        a = math.nextafter(a, math.inf)
        n += 1
    return n


@given(st.floats(0.5, 50), st.floats(-50, 50))
def test_width_control(x, y):
    for R in (ia.exp(Interval(y, y)), ia.log(Interval(x, x)), ia.cbrt(Interval(y, y))):
        assert _ulps_between(R.lo, R.hi) <= 4


@given(finite, finite, finite, finite, st.floats(0, 10), st.floats(0, 10))
def test_inclusion_monotone(a, b, c, d, e1, e2):
    X, Y = iv(a, b), iv(c, d)
    Xw, Yw = X.widen(e1), Y.widen(e2)
    for f in (lambda p, q: p + q, lambda p, q: p - q, lambda p, q: p * q):
        assert f(Xw, Yw).contains(f(X, Y))


@given(st.floats(-3, 3), st.floats(0, 1), st.integers(0, 25))
def test_pow_int_contains(x, w, n):
    X = Interval(x, x + w)
    R = ia.pow_int(X, n)
    with mpmath.workdps(50):
        for t in (X.lo, X.hi, X.mid):
            assert mpmath.mpf(R.lo) <= mpmath.mpf(t) ** n <= mpmath.mpf(R.hi)


def test_serialisation_round_trip():
    x = ia.exp(Interval(0.1, 0.2))
    assert Interval.from_strings(x.to_strings()).contains(x)


def test_underflowing_products_are_widened():
    t = Interval(0.0, 3.5e-145)
    assert ia.pow_int(t, 3).hi > 0.0
    assert (Interval(1e-200, 1e-200) * Interval(-1e-200, -1e-200)).lo < 0.0
    A = IntervalArray(np.array([1e-200]), np.array([1e-200]))
    assert (A * A).hi[0] > 0.0


def test_interval_array_matches_scalars():
    rng = np.random.default_rng(0)
    lo = rng.uniform(-2, 2, 50)
    hi = lo + rng.uniform(0, 1, 50)
    A = IntervalArray(lo, hi)
    B = A * A + A
    for i, s in enumerate(A.to_intervals()):
        ref = s * s + s
        assert B.lo[i] <= ref.lo + 1e-15 and B.hi[i] >= ref.hi - 1e-15


def test_mp_provider_agrees():
    x = Interval(0.3, 0.3)
    a = ia._mp_apply("exp", x)
    assert a.contains(ia.exp(x).mid)
