"""Closed intervals with outward rounding, plus exact rational fallbacks.

An :class:`Interval` whose endpoints are both ``int``/``Fraction`` stays exact
under ``+ - *`` and division by exact numbers.  As soon as a float enters,
results are rounded outward by one ulp per operation, which is enough for
IEEE round-to-nearest arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

Number = Union[int, float, Fraction]

UNIT_ROUNDOFF = 2.0 ** -53


def as_fraction(x) -> Fraction:
    """Exact rational for a user-supplied parameter.

    Floats are read as the decimal they print as, so ``0.1`` means 1/10.
    Internal code that needs the binary value should call ``Fraction(x)``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite parameter {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    raise TypeError(f"cannot read {x!r} as a rational")


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def down(x) -> float:
    """Largest float not above ``x``."""
    f = float(x)
    if _is_exact(x) and Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def up(x) -> float:
    """Smallest float not below ``x``."""
    f = float(x)
    if _is_exact(x) and Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


def _dn(f: float) -> float:
    return math.nextafter(f, -math.inf)


def _up(f: float) -> float:
    return math.nextafter(f, math.inf)


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        if isinstance(lo, Interval) or isinstance(hi, Interval):
            raise TypeError("nested Interval")
        if isinstance(lo, float) and math.isnan(lo) or isinstance(hi, float) and math.isnan(hi):
            raise ValueError("NaN endpoint")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def around(cls, x: float, err: float) -> "Interval":
        return cls(_dn(x - err), _up(x + err))

    @property
    def exact(self) -> bool:
        return _is_exact(self.lo) and _is_exact(self.hi)

    def to_float(self) -> "Interval":
        return Interval(down(self.lo), up(self.hi))

    @property
    def width(self) -> float:
        return up(self.hi - self.lo) if self.exact else _up(self.hi - self.lo)

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        return NotImplemented

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def subset_of(self, lo, hi) -> bool:
        return lo <= self.lo and self.hi <= hi

    def intersects(self, lo, hi) -> bool:
        return self.lo <= hi and lo <= self.hi

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    @staticmethod
    def _coerce(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        if isinstance(x, (int, float, Fraction)):
            return Interval(x, x)
        return NotImplemented

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.exact and o.exact:
            return Interval(self.lo + o.lo, self.hi + o.hi)
        return Interval(_dn(down(self.lo) + down(o.lo)), _up(up(self.hi) + up(o.hi)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.exact and o.exact:
            p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
            return Interval(min(p), max(p))
        a = (down(self.lo), up(self.hi))
        b = (down(o.lo), up(o.hi))
        # a zero product is exact only when a factor is zero, not after underflow
        lo = min(0.0 if x == 0 or y == 0 else _dn(x * y) for x in a for y in b)
        hi = max(0.0 if x == 0 or y == 0 else _up(x * y) for x in a for y in b)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        if self.exact:
            return Interval(Fraction(1) / self.hi, Fraction(1) / self.lo)
        return Interval(_dn(1.0 / up(self.hi)), _up(1.0 / down(self.lo)))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.exact and o.exact:
            return self * o.reciprocal()
        r = o.reciprocal()
        return self * r

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0 if self.exact else 0.0, max(-self.lo, self.hi))

    def mag(self):
        """Largest absolute value in the interval."""
        return max(abs(self.lo), abs(self.hi))


def log_interval(x) -> Interval:
    """Enclosure of ``log(x)`` for a positive number or interval."""
    iv = x if isinstance(x, Interval) else Interval(x)
    if iv.lo <= 0:
        raise ValueError("logarithm of a non-positive quantity")
    lo = math.log(down(iv.lo))
    hi = math.log(up(iv.hi))
    # libm log is within one ulp; widen by two to be safe
    return Interval(_dn(_dn(lo)), _up(_up(hi)))


def sqrt_interval(x) -> Interval:
    iv = x if isinstance(x, Interval) else Interval(x)
    if iv.lo < 0:
        raise ValueError("square root of a negative quantity")
    return Interval(max(0.0, _dn(math.sqrt(down(iv.lo)))), _up(math.sqrt(up(iv.hi))))


def gamma(n: int) -> float:
    """Bound on the relative error of ``n`` chained float additions."""
    nu = n * UNIT_ROUNDOFF
    if nu >= 0.5:
        raise OverflowError("too many terms for the rounding bound")
    return _up(nu / (1.0 - nu))


def enclosed_cumsum(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Prefix sums (with a leading zero) enclosing every partial sum of values in [lo, hi].

    ``np.cumsum`` adds sequentially, so the k-th partial sum carries at most
    ``gamma(k) * sum(|x_i|)`` rounding error.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n = lo.size
    out_lo = np.zeros(n + 1)
    out_hi = np.zeros(n + 1)
    if n == 0:
        return out_lo, out_hi
    slo = np.cumsum(lo)
    shi = np.cumsum(hi)
    mag = np.cumsum(np.maximum(np.abs(lo), np.abs(hi)))
    k = np.arange(1, n + 1, dtype=np.float64)
    g = k * UNIT_ROUNDOFF * (1.0 + 4.0 * n * UNIT_ROUNDOFF)
    err = g * mag * (1.0 + 1e-12) + 5e-324
    out_lo[1:] = np.nextafter(slo - err, -np.inf)
    out_hi[1:] = np.nextafter(shi + err, np.inf)
    return out_lo, out_hi


class FixedInterval:
    """Interval ``[a, b] / 2**k`` with integer endpoints.

    Used where affine maps expand errors geometrically: the precision ``k``
    is chosen up front, every operation rounds outward to the grid, and
    costs stay linear in ``k``.  Multiplication is only by exact rationals
    or other intervals on the same grid.
    """

    __slots__ = ("a", "b", "k")

    def __init__(self, a: int, b: int, k: int):
        if a > b:
            raise ValueError("empty fixed-point interval")
        self.a, self.b, self.k = a, b, k

    @classmethod
    def from_rational(cls, q, k: int) -> "FixedInterval":
        q = q if isinstance(q, Fraction) else Fraction(q)
        n, d = q.numerator << k, q.denominator
        return cls(n // d, -((-n) // d), k)

    @property
    def lo(self) -> Fraction:
        return Fraction(self.a, 1 << self.k)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.b, 1 << self.k)

    @property
    def width(self) -> Fraction:
        return Fraction(self.b - self.a, 1 << self.k)

    @property
    def mid(self) -> Fraction:
        return Fraction(self.a + self.b, 2 << self.k)

    def __repr__(self):
        return f"FixedInterval({float(self.lo)!r}, {float(self.hi)!r}, k={self.k})"

    def _lift(self, x) -> "FixedInterval":
        if isinstance(x, FixedInterval):
            if x.k != self.k:
                raise ValueError("precision mismatch")
            return x
        return FixedInterval.from_rational(x, self.k)

    def __add__(self, other):
        o = self._lift(other)
        return FixedInterval(self.a + o.a, self.b + o.b, self.k)

    __radd__ = __add__

    def __neg__(self):
        return FixedInterval(-self.b, -self.a, self.k)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, FixedInterval):
            p = (self.a * other.a, self.a * other.b, self.b * other.a, self.b * other.b)
            k = self.k
            return FixedInterval(min(p) >> k, -((-max(p)) >> k), k)
        q = other if isinstance(other, Fraction) else Fraction(other)
        n, d = q.numerator, q.denominator
        if n >= 0:
            return FixedInterval((self.a * n) // d, -((-self.b * n) // d), self.k)
        return FixedInterval((self.b * n) // d, -((-self.a * n) // d), self.k)

    __rmul__ = __mul__

    def hull(self, other: "FixedInterval") -> "FixedInterval":
        return FixedInterval(min(self.a, other.a), max(self.b, other.b), self.k)

    def mag_squared_upper(self) -> Fraction:
        m = max(abs(self.a), abs(self.b))
        return Fraction(m * m, 1 << (2 * self.k))

    def subset_of(self, lo, hi) -> bool:
        lo, hi = Fraction(lo), Fraction(hi)
        return (self.a * lo.denominator >= lo.numerator << self.k
                and self.b * hi.denominator <= hi.numerator << self.k)
