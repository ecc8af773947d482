"""Directed-rounding interval arithmetic.

Two carriers are provided:

* :class:`Interval`, an immutable closed interval with float endpoints.  The
  four basic operations use error-free transformations, so a result is exact
  whenever the real result is a machine number and otherwise is widened by a
  single unit in the last place in the correct direction.
* :class:`IntervalArray`, a vectorised interval type backed by two numpy
  arrays.  Every operation widens each endpoint by one ulp (basic operations)
  or by the elementary-function budget, which is cheaper than the scalar path
  and still rigorous.

Elementary functions (exp, log, cbrt) come from the platform libm, which is
faithfully rounded, and are widened by ``ELEMENTARY_ULPS`` ulps on each side.
Setting the environment variable ``NOISECERT_ELEMENTARY=mpmath`` before import
switches scalar elementary functions to mpmath's interval arithmetic, which
returns the tightest float enclosure.  Array code always uses the widened
libm path.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "DomainError",
    "Interval",
    "IntervalArray",
    "parse_decimal",
    "ELEMENTARY_PROVIDER",
    "ELEMENTARY_ULPS",
    "down",
    "up",
    "add_up",
    "mul_up",
    "div_up",
    "sum_up",
    "sum_down",
    "exp",
    "log",
    "cbrt",
    "sqrt",
    "pow_int",
    "pow_frac",
]

ELEMENTARY_PROVIDER = os.environ.get("NOISECERT_ELEMENTARY", "faithful").lower()
if ELEMENTARY_PROVIDER not in ("faithful", "mpmath"):
    raise ImportError(f"unknown elementary-function provider {ELEMENTARY_PROVIDER!r}")

#: Error budget, in ulps per side, applied to libm results.
ELEMENTARY_ULPS = 2

_INF = math.inf
_TINY = 5e-324  # smallest positive subnormal
_SPLITTER = 134217729.0  # 2**27 + 1, Veltkamp splitting constant
_EFT_MAX = 2.0**995
_EFT_MIN = 2.0**-960


class DomainError(ValueError):
    """Raised when an operation is undefined on part of its interval argument."""


Number = Union[int, float, Fraction]


# ---------------------------------------------------------------------------
# Scalar rounding helpers
# ---------------------------------------------------------------------------


def down(x: float, n: int = 1) -> float:
    """Return ``x`` moved ``n`` floats towards minus infinity."""
    for _ in range(n):
        x = math.nextafter(x, -_INF)
    return x


def up(x: float, n: int = 1) -> float:
    """Return ``x`` moved ``n`` floats towards plus infinity."""
    for _ in range(n):
        x = math.nextafter(x, _INF)
    return x


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _split(a: float) -> tuple[float, float]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _eft_safe(*xs: float) -> bool:
    for x in xs:
        ax = abs(x)
        if not math.isfinite(x) or ax > _EFT_MAX or (ax != 0.0 and ax < _EFT_MIN):
            return False
    return True


def _add_dir(a: float, b: float) -> tuple[float, float]:
    """Lower and upper float bounds of the exact sum ``a + b``."""
    s = a + b
    if not math.isfinite(s):
        if math.isnan(s):
            return -_INF, _INF
        return (s, s) if math.isinf(a) or math.isinf(b) else (down(s), up(s))
    if not _eft_safe(a, b, s):
        return down(s), up(s)
    s, e = _two_sum(a, b)
    if e == 0.0:
        return s, s
    return (s, up(s)) if e > 0 else (down(s), s)


def _mul_dir(a: float, b: float) -> tuple[float, float]:
    """Lower and upper float bounds of the exact product ``a * b``."""
    if a == 0.0 or b == 0.0:
        return 0.0, 0.0
    p = a * b
    if not math.isfinite(p):
        if math.isnan(p):
            return -_INF, _INF
        return (p, p) if math.isinf(a) or math.isinf(b) else (down(p), up(p))
    if p == 0.0:  # underflow: the exact product is a tiny nonzero number
        return (0.0, up(0.0)) if (a > 0) == (b > 0) else (down(0.0), 0.0)
    if not _eft_safe(a, b, p):
        return down(p), up(p)
    p, e = _two_prod(a, b)
    if e == 0.0:
        return p, p
    return (p, up(p)) if e > 0 else (down(p), p)


def _div_dir(a: float, b: float) -> tuple[float, float]:
    """Lower and upper float bounds of the exact quotient ``a / b`` (b != 0)."""
    if a == 0.0:
        return 0.0, 0.0
    q = a / b
    if not math.isfinite(q) or math.isinf(b):
        if math.isnan(q):
            return -_INF, _INF
        if math.isinf(q) and math.isinf(a):
            return q, q
        return down(q), up(q)
    if q == 0.0:
        return (0.0, up(0.0)) if (a > 0) == (b > 0) else (down(0.0), 0.0)
    if not _eft_safe(a, b, q):
        return down(q), up(q)
    p, e = _two_prod(q, b)
    # a - q*b = (a - p) - e; a - p is exact by Sterbenz when q is a faithful quotient.
    d = a - p
    if d == e:
        return q, q
    residual_positive = d > e
    if (b > 0) == residual_positive:
        return q, up(q)
    return down(q), q


def add_up(a, b):
    """Upper bound of ``a + b`` (scalars or arrays)."""
    return np.nextafter(np.add(a, b), _INF)


def mul_up(a, b):
    """Upper bound of ``a * b`` for nonnegative operands (scalars or arrays)."""
    return np.nextafter(np.multiply(a, b), _INF)


def div_up(a, b):
    """Upper bound of ``a / b`` for nonnegative ``a`` and positive ``b``."""
    return np.nextafter(np.divide(a, b), _INF)


def _fsum_residual(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float).ravel()
    try:
        s = math.fsum(v)
    except OverflowError:  # finite terms whose exact sum exceeds the float range
        return math.nan, 0.0
    if not math.isfinite(s):
        return s, 0.0
    # sign of (exact sum - s), computed exactly by a second correctly rounded sum
    return s, math.fsum(np.concatenate([v, [-s]]))


def sum_up(values) -> float:
    """Upper bound of the exact sum of a float sequence (exact sums are returned unchanged)."""
    s, r = _fsum_residual(values)
    if math.isnan(s):
        return _INF
    return up(s) if r > 0 else s


def sum_down(values) -> float:
    """Lower bound of the exact sum of a float sequence."""
    s, r = _fsum_residual(values)
    if math.isnan(s):
        return -_INF
    return down(s) if r < 0 else s


def _fraction_bounds(f: Fraction) -> tuple[float, float]:
    """Tightest float interval containing the rational ``f``."""
    x = float(f)  # correctly rounded
    fx = Fraction(x)
    if fx == f:
        return x, x
    if fx > f:
        return down(x), x
    return x, up(x)


def parse_decimal(text: str) -> "Interval":
    """Smallest float interval containing the decimal literal ``text``.

    Examples
    --------
    >>> iv = parse_decimal("0.1")
    >>> iv.lo < 0.1 <= iv.hi or iv.lo <= 0.1 < iv.hi
    True
    """
    lo, hi = _fraction_bounds(Fraction(text.strip()))
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# Scalar interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval ``[lo, hi]`` with float endpoints.

    Infinite endpoints are allowed and represent unbounded enclosures; NaN is
    rejected.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("NaN endpoint in Interval")
        if lo > hi:
            raise ValueError(f"empty interval [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # -- construction -----------------------------------------------------
    @staticmethod
    def point(x: Number) -> "Interval":
        return _coerce(x)

    @staticmethod
    def from_fraction(f: Fraction) -> "Interval":
        return Interval(*_fraction_bounds(Fraction(f)))

    @staticmethod
    def from_decimal(lo_text: str, hi_text: str | None = None) -> "Interval":
        """Interval whose endpoints enclose two decimal literals."""
        a = parse_decimal(lo_text)
        b = a if hi_text is None else parse_decimal(hi_text)
        return Interval(min(a.lo, b.lo), max(a.hi, b.hi))

    @staticmethod
    def from_strings(data: dict) -> "Interval":
        """Inverse of :meth:`to_strings` (bit-exact round trip)."""
        return Interval(float(data["lo"]), float(data["hi"]))

    @staticmethod
    def hull_of(items: Iterable["Interval"]) -> "Interval":
        items = list(items)
        return Interval(min(i.lo for i in items), max(i.hi for i in items))

    def to_strings(self) -> dict:
        """Decimal serialisation ``{"lo": ..., "hi": ...}``.

        ``repr`` of a float is the shortest decimal that reads back to the same
        float, so reloading reproduces the interval exactly.
        """
        return {"lo": repr(self.lo), "hi": repr(self.hi)}

    # -- inspection -------------------------------------------------------
    @property
    def mid(self) -> float:
        if math.isinf(self.lo) or math.isinf(self.hi):
            if self.lo == -self.hi:
                return 0.0
            return self.lo if math.isinf(self.hi) else self.hi
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def width(self) -> float:
        return up(self.hi - self.lo)

    @property
    def rad(self) -> float:
        m = self.mid
        return up(max(self.hi - m, m - self.lo))

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def is_point(self) -> bool:
        return self.lo == self.hi

    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, other) -> bool:
        if isinstance(other, Interval):
            return self.lo <= other.lo and other.hi <= self.hi
        if isinstance(other, Fraction):
            return Fraction(self.lo) <= other <= Fraction(self.hi) if self.is_finite() else (
                self.lo <= float(other) <= self.hi)
        return self.lo <= other <= self.hi

    __contains__ = contains

    def overlaps(self, other: "Interval") -> bool:
        other = _coerce(other)
        return self.lo <= other.hi and other.lo <= self.hi

    def hull(self, other) -> "Interval":
        other = _coerce(other)
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other) -> "Interval | None":
        other = _coerce(other)
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def widen(self, amount: float) -> "Interval":
        return Interval(down(self.lo - amount), up(self.hi + amount))

    # -- certain comparisons ---------------------------------------------
    def certainly_lt(self, other) -> bool:
        return self.hi < _coerce(other).lo

    def certainly_le(self, other) -> bool:
        return self.hi <= _coerce(other).lo

    def certainly_gt(self, other) -> bool:
        return self.lo > _coerce(other).hi

    def certainly_positive(self) -> bool:
        return self.lo > 0.0

    def certainly_negative(self) -> bool:
        return self.hi < 0.0

    # -- arithmetic -------------------------------------------------------
    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        o = _coerce(other)
        return Interval(_add_dir(self.lo, o.lo)[0], _add_dir(self.hi, o.hi)[1])

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Interval":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Interval":
        o = _coerce(other)
        los, his = [], []
        for a in (self.lo, self.hi):
            for b in (o.lo, o.hi):
                lo, hi = _mul_dir(a, b)
                los.append(lo)
                his.append(hi)
        return Interval(min(los), max(his))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        o = _coerce(other)
        if o.lo <= 0.0 <= o.hi:
            raise DomainError("division by an interval containing 0")
        los, his = [], []
        for a in (self.lo, self.hi):
            for b in (o.lo, o.hi):
                lo, hi = _div_dir(a, b)
                los.append(lo)
                his.append(hi)
        return Interval(min(los), max(his))

    def __rtruediv__(self, other) -> "Interval":
        return _coerce(other) / self

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, (int, np.integer)):
            raise TypeError("use pow_frac for non-integer exponents")
        return pow_int(self, int(n))

    def __abs__(self) -> "Interval":
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def sqr(self) -> "Interval":
        return pow_int(self, 2)

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        x = int(x)
        if abs(x) <= 2**53:
            return Interval(float(x), float(x))
        return Interval.from_fraction(Fraction(x))
    if isinstance(x, (float, np.floating)):
        return Interval(float(x), float(x))
    if isinstance(x, Fraction):
        return Interval.from_fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Interval")


# ---------------------------------------------------------------------------
# Elementary functions (scalar and array dispatch)
# ---------------------------------------------------------------------------


def _mp_convert(a) -> tuple[float, float]:
    """Outward float enclosure of an mpmath interval."""
    import mpmath

    lo_mp, hi_mp = a.a, a.b
    lo = float(lo_mp)
    if mpmath.mpf(lo) > lo_mp:
        lo = down(lo)
    hi = float(hi_mp)
    if mpmath.mpf(hi) < hi_mp:
        hi = up(hi)
    return lo, hi


def _mp_apply(name: str, x: Interval) -> Interval:
    import mpmath

    iv = mpmath.iv
    old = iv.prec
    iv.prec = 96
    try:
        arg = iv.mpf([x.lo, x.hi])
        res = getattr(iv, name)(arg)
        return Interval(*_mp_convert(res))
    finally:
        iv.prec = old


def _widen_libm(lo: float, hi: float) -> tuple[float, float]:
    return down(lo, ELEMENTARY_ULPS), up(hi, ELEMENTARY_ULPS)


def exp(x):
    """Enclosure of ``exp`` (monotone increasing)."""
    if isinstance(x, IntervalArray):
        return x.exp()
    x = _coerce(x)
    if x.lo == x.hi == 0.0:
        return Interval(1.0, 1.0)
    if ELEMENTARY_PROVIDER == "mpmath" and x.is_finite():
        return _mp_apply("exp", x)
    lo = 0.0 if x.lo == -_INF else max(0.0, down(math.exp(x.lo), ELEMENTARY_ULPS)) if x.lo < 709.7 else _INF
    try:
        hi = up(math.exp(x.hi), ELEMENTARY_ULPS)
    except OverflowError:
        hi = _INF
    if lo == _INF:
        lo = up(math.exp(709.0))
    return Interval(lo, hi)


def log(x):
    """Enclosure of the natural logarithm; requires ``x.lo > 0``."""
    if isinstance(x, IntervalArray):
        return x.log()
    x = _coerce(x)
    if x.lo <= 0.0:
        raise DomainError("log of an interval touching or below 0")
    if x.lo == x.hi == 1.0:
        return Interval(0.0, 0.0)
    if ELEMENTARY_PROVIDER == "mpmath" and x.is_finite():
        return _mp_apply("log", x)
    hi = _INF if x.hi == _INF else math.log(x.hi)
    return Interval(*_widen_libm(math.log(x.lo), hi))


def _cbrt_float(v: float) -> float:
    return float(np.cbrt(v))


def _cbrt_exact(v: float) -> bool:
    r = _cbrt_float(v)
    return math.isfinite(r) and Fraction(r) ** 3 == Fraction(v)


def cbrt(x):
    """Real cube root (defined for negative arguments as well)."""
    if isinstance(x, IntervalArray):
        return x.cbrt()
    x = _coerce(x)
    if ELEMENTARY_PROVIDER == "mpmath" and x.is_finite():
        return _cbrt_signed_mp(x)
    lo = _cbrt_float(x.lo) if _cbrt_exact(x.lo) else down(_cbrt_float(x.lo), ELEMENTARY_ULPS)
    hi = _cbrt_float(x.hi) if _cbrt_exact(x.hi) else up(_cbrt_float(x.hi), ELEMENTARY_ULPS)
    return Interval(lo, hi)


def _cbrt_signed_mp(x: Interval) -> Interval:
    """Cube root bounds certified by exact rational cubing.

    The nearest float is moved outward one ulp at a time until its exact cube
    brackets the argument, so the result does not rely on library rounding.
    """
    import mpmath

    def bracket(v: float) -> tuple[float, float]:
        with mpmath.workprec(80):
            r = float(mpmath.cbrt(abs(mpmath.mpf(v))))
        r = math.copysign(r, v)
        fv = Fraction(v)
        lo = hi = r
        while Fraction(lo) ** 3 > fv:
            lo = down(lo)
        while Fraction(hi) ** 3 < fv:
            hi = up(hi)
        return lo, hi

    return Interval(bracket(x.lo)[0], bracket(x.hi)[1])


def sqrt(x):
    """Square root; requires ``x.lo >= 0``."""
    if isinstance(x, IntervalArray):
        return x.sqrt()
    x = _coerce(x)
    if x.lo < 0.0:
        raise DomainError("sqrt of an interval with negative part")

    def bound(v: float, upper: bool) -> float:
        s = math.sqrt(v)
        if v == 0.0 or math.isinf(v):
            return s
        if not _eft_safe(s, v):
            return up(s) if upper else down(s)
        p, e = _two_prod(s, s)
        d = p - v
        # p + e - v is the signed error of s*s versus v
        if d == -e:
            return s
        too_big = d > -e
        if upper:
            return s if too_big else up(s)
        return down(s) if too_big else s

    return Interval(bound(x.lo, False), bound(x.hi, True))


def _pow_nonneg(a: float, n: int, upper: bool) -> float:
    result = 1.0
    base = a
    pick = 1 if upper else 0
    while n:
        if n & 1:
            result = _mul_dir(result, base)[pick]
        n >>= 1
        if n:
            base = _mul_dir(base, base)[pick]
    return result


def pow_int(x, n: int):
    """Integer power by repeated squaring (no logarithms involved)."""
    if isinstance(x, IntervalArray):
        return x.pow_int(n)
    x = _coerce(x)
    if n == 0:
        return Interval(1.0, 1.0)
    if n < 0:
        return Interval(1.0, 1.0) / pow_int(x, -n)
    if n % 2 == 0:
        a = abs(x)
        return Interval(_pow_nonneg(a.lo, n, False), _pow_nonneg(a.hi, n, True))
    # odd power is monotone increasing
    def odd(v: float, upper: bool) -> float:
        if v >= 0:
            return _pow_nonneg(v, n, upper)
        return -_pow_nonneg(-v, n, not upper)

    return Interval(odd(x.lo, False), odd(x.hi, True))


def pow_frac(x, p: int, q: int):
    """``x**(p/q)`` with real odd-root semantics for negative ``x``.

    ``q == 3`` routes through :func:`cbrt`; even ``q`` requires ``x >= 0``.
    A negative resulting exponent on an interval containing 0 raises
    :class:`DomainError`.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    g = math.gcd(p, q)
    p, q = p // g, q // g
    if q == 1:
        return pow_int(x, p)
    if isinstance(x, IntervalArray):
        root = x.cbrt() if q == 3 else x.sqrt() if q == 2 else x.root(q)
        return root.pow_int(p)
    x = _coerce(x)
    if q == 3:
        root = cbrt(x)
    elif q == 2:
        root = sqrt(x)
    elif q % 2 == 0:
        if x.lo < 0:
            raise DomainError("even root of a negative interval")
        root = _root_pos(x, q)
    else:
        root = _odd_root(x, q)
    return pow_int(root, p)


def _root_pos(x: Interval, q: int) -> Interval:
    def one(v: float, upper: bool) -> float:
        if v == 0.0:
            return 0.0
        r = exp(log(Interval(v, v)) / q)
        return r.hi if upper else r.lo

    return Interval(one(x.lo, False), one(x.hi, True))


def _odd_root(x: Interval, q: int) -> Interval:
    def one(v: float, upper: bool) -> float:
        if v >= 0:
            return _root_pos(Interval(v, v), q).hi if upper else _root_pos(Interval(v, v), q).lo
        r = _root_pos(Interval(-v, -v), q)
        return -r.lo if upper else -r.hi

    return Interval(one(x.lo, False), one(x.hi, True))


# ---------------------------------------------------------------------------
# Vectorised intervals
# ---------------------------------------------------------------------------


def _nd(a, n: int = 1):
    for _ in range(n):
        a = np.nextafter(a, -_INF)
    return a


def _nu(a, n: int = 1):
    for _ in range(n):
        a = np.nextafter(a, _INF)
    return a


class IntervalArray:
    """Array of closed intervals stored as two float64 arrays.

    Operations broadcast like numpy.  Division by an element containing zero
    and logarithms of elements touching zero produce infinite endpoints rather
    than raising, so that callers can flag unbounded pieces in bulk.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 100  # make numpy defer to our reflected operators

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo if hi is None else np.asarray(hi, dtype=np.float64)
        lo, hi = np.broadcast_arrays(lo, hi)
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    # -- construction / conversion ---------------------------------------
    @staticmethod
    def full(shape, value: Interval) -> "IntervalArray":
        value = _coerce(value)
        return IntervalArray(np.full(shape, value.lo), np.full(shape, value.hi))

    @staticmethod
    def from_intervals(items: Sequence[Interval]) -> "IntervalArray":
        return IntervalArray([i.lo for i in items], [i.hi for i in items])

    def to_intervals(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.lo.ravel(), self.hi.ravel())]

    def __getitem__(self, idx) -> "IntervalArray":
        return IntervalArray(self.lo[idx], self.hi[idx])

    def item(self, idx) -> Interval:
        return Interval(float(self.lo[idx]), float(self.hi[idx]))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def size(self) -> int:
        return self.lo.size

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def mid(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, np.where(np.isfinite(self.lo), self.lo, self.hi))

    @property
    def rad(self) -> np.ndarray:
        m = self.mid
        return _nu(np.maximum(self.hi - m, m - self.lo))

    @property
    def width(self) -> np.ndarray:
        return _nu(self.hi - self.lo)

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self) -> np.ndarray:
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def hull_all(self) -> Interval:
        return Interval(float(np.min(self.lo)), float(np.max(self.hi)))

    def sum(self) -> Interval:
        return Interval(sum_down(self.lo), sum_up(self.hi))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.lo <= x) & (x <= self.hi)

    def __repr__(self) -> str:
        return f"IntervalArray(lo={self.lo!r}, hi={self.hi!r})"

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def _other(o) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(o, IntervalArray):
            return o.lo, o.hi
        if isinstance(o, Interval):
            return np.float64(o.lo), np.float64(o.hi)
        if isinstance(o, Fraction) or (isinstance(o, (int, np.integer)) and abs(int(o)) > 2**53):
            iv = _coerce(o)
            return np.float64(iv.lo), np.float64(iv.hi)
        arr = np.asarray(o, dtype=np.float64)
        return arr, arr

    def __neg__(self) -> "IntervalArray":
        return IntervalArray(-self.hi, -self.lo)

    def __add__(self, o) -> "IntervalArray":
        olo, ohi = self._other(o)
        return IntervalArray(_nd(self.lo + olo), _nu(self.hi + ohi))

    __radd__ = __add__

    def __sub__(self, o) -> "IntervalArray":
        olo, ohi = self._other(o)
        return IntervalArray(_nd(self.lo - ohi), _nu(self.hi - olo))

    def __rsub__(self, o) -> "IntervalArray":
        olo, ohi = self._other(o)
        return IntervalArray(_nd(olo - self.hi), _nu(ohi - self.lo))

    def __mul__(self, o) -> "IntervalArray":
        olo, ohi = self._other(o)
        with np.errstate(invalid="ignore"):
            p1 = self.lo * olo
            p2 = self.lo * ohi
            p3 = self.hi * olo
            p4 = self.hi * ohi
        prods = np.stack(np.broadcast_arrays(p1, p2, p3, p4))
        # 0 * inf is taken as 0 (the finite factor is an exact zero endpoint)
        prods = np.where(np.isnan(prods), 0.0, prods)
        xl, xh, yl, yh = np.broadcast_arrays(self.lo, self.hi, olo, ohi)
        fx = np.stack([xl, xl, xh, xh])
        fy = np.stack([yl, yh, yl, yh])
        exact_zero = (fx == 0.0) | (fy == 0.0)
        pos = (fx > 0) == (fy > 0)
        # a zero product of nonzero factors is an underflow and must be widened
        lows = np.where(prods == 0.0, np.where(exact_zero | pos, 0.0, -_TINY), _nd(prods))
        highs = np.where(prods == 0.0, np.where(exact_zero | ~pos, 0.0, _TINY), _nu(prods))
        return IntervalArray(np.min(lows, axis=0), np.max(highs, axis=0))

    __rmul__ = __mul__

    def reciprocal(self) -> "IntervalArray":
        zero_in = (self.lo <= 0.0) & (self.hi >= 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = _nd(1.0 / self.hi)
            hi = _nu(1.0 / self.lo)
        lo = np.where(zero_in, -_INF, lo)
        hi = np.where(zero_in, _INF, hi)
        return IntervalArray(lo, hi)

    def __truediv__(self, o) -> "IntervalArray":
        if isinstance(o, IntervalArray):
            return self * o.reciprocal()
        olo, ohi = self._other(o)
        return self * IntervalArray(olo, ohi).reciprocal()

    def __rtruediv__(self, o) -> "IntervalArray":
        olo, ohi = self._other(o)
        return IntervalArray(olo, ohi) * self.reciprocal()

    def __pow__(self, n: int) -> "IntervalArray":
        return self.pow_int(int(n))

    def __abs__(self) -> "IntervalArray":
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        hi = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return IntervalArray(lo, hi)

    def sqr(self) -> "IntervalArray":
        return self.pow_int(2)

    def pow_int(self, n: int) -> "IntervalArray":
        if n == 0:
            return IntervalArray(np.ones_like(self.lo))
        if n < 0:
            return self.pow_int(-n).reciprocal()
        if n % 2 == 0:
            a = abs(self)
            return IntervalArray(_pow_arr(a.lo, n, False), _pow_arr(a.hi, n, True))
        neg_lo = self.lo < 0
        neg_hi = self.hi < 0
        lo = np.where(neg_lo, -_pow_arr(np.abs(self.lo), n, True), _pow_arr(np.abs(self.lo), n, False))
        hi = np.where(neg_hi, -_pow_arr(np.abs(self.hi), n, False), _pow_arr(np.abs(self.hi), n, True))
        return IntervalArray(lo, hi)

    # -- elementary functions ----------------------------------------------
    def exp(self) -> "IntervalArray":
        with np.errstate(over="ignore"):
            lo = np.maximum(_nd(np.exp(self.lo), ELEMENTARY_ULPS), 0.0)
            hi = _nu(np.exp(self.hi), ELEMENTARY_ULPS)
        lo = np.where(self.lo == 0.0, 1.0, lo)
        hi = np.where(self.hi == 0.0, 1.0, hi)
        return IntervalArray(lo, hi)

    def log(self) -> "IntervalArray":
        """Logarithm of the nonnegative part; elements touching 0 get ``-inf``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = _nd(np.log(np.maximum(self.lo, 0.0)), ELEMENTARY_ULPS)
            hi = _nu(np.log(np.maximum(self.hi, 0.0)), ELEMENTARY_ULPS)
        lo = np.where(self.lo <= 0.0, -_INF, lo)
        lo = np.where(self.lo == 1.0, 0.0, lo)
        hi = np.where(self.hi == 1.0, 0.0, hi)
        return IntervalArray(lo, hi)

    def cbrt(self) -> "IntervalArray":
        return IntervalArray(_nd(np.cbrt(self.lo), ELEMENTARY_ULPS), _nu(np.cbrt(self.hi), ELEMENTARY_ULPS))

    def sqrt(self) -> "IntervalArray":
        if np.any(self.lo < 0):
            raise DomainError("sqrt of an interval with negative part")
        return IntervalArray(np.maximum(_nd(np.sqrt(self.lo)), 0.0), _nu(np.sqrt(self.hi)))

    def root(self, q: int) -> "IntervalArray":
        if q % 2 == 0 and np.any(self.lo < 0):
            raise DomainError("even root of a negative interval")
        a = abs(self)
        with np.errstate(divide="ignore"):
            r = (IntervalArray(np.maximum(a.lo, 0.0), a.hi).log() * (1.0 / q)).exp()
        r_lo = np.where(a.lo == 0.0, 0.0, r.lo)
        if q % 2 == 1:
            lo = np.where(self.lo < 0, -(IntervalArray(-self.lo).log() * (1.0 / q)).exp().hi, r_lo)
            hi = np.where(self.hi < 0, -(IntervalArray(-self.hi).log() * (1.0 / q)).exp().lo, r.hi)
            return IntervalArray(lo, hi)
        return IntervalArray(r_lo, r.hi)


def _pow_arr(a: np.ndarray, n: int, upper: bool) -> np.ndarray:
    """Directed power of a nonnegative float array by repeated squaring."""
    step = _nu if upper else _nd
    result = np.ones_like(a)
    base = a.copy()
    first = True
    while n:
        if n & 1:
            if first:
                result = base.copy()
                first = False
            else:
                result = step(result * base)
        n >>= 1
        if n:
            base = step(base * base)
    if not upper:
        result = np.maximum(result, 0.0)
    return result
