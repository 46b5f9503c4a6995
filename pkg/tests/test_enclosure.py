import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipflop.enclosure import (
    FixedInterval,
    Interval,
    as_fraction,
    down,
    enclosed_cumsum,
    log_interval,
    sqrt_interval,
    up,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
rationals = st.fractions(min_value=-1000, max_value=1000, max_denominator=10 ** 6)


def test_decimal_reading_of_floats():
    assert as_fraction(0.1) == F(1, 10)
    assert as_fraction("21/20") == F(21, 20)
    with pytest.raises(ValueError):
        as_fraction(float("inf"))


@given(rationals)
def test_down_up_bracket(q):
    assert F(down(q)) <= q <= F(up(q))


@given(finite, finite, finite, finite)
def test_float_ops_contain_exact_results(a, b, c, d):
    x = Interval(min(a, b), max(a, b))
    y = Interval(min(c, d), max(c, d))
    xs = [F(x.lo), F(x.hi)]
    ys = [F(y.lo), F(y.hi)]
    s, p = x + y, x * y
    for u in xs:
        for v in ys:
            assert F(s.lo) <= u + v <= F(s.hi)
            assert F(p.lo) <= u * v <= F(p.hi)


@given(rationals, rationals)
def test_exact_intervals_stay_exact(a, b):
    x = Interval(min(a, b), max(a, b))
    assert (x * x).exact and (x - x).exact
    assert (x - x).lo == x.lo - x.hi


@given(st.fractions(min_value=F(1, 1000), max_value=1000))
def test_log_encloses_high_precision_log(q):
    iv = log_interval(q)
    with mpmath.workdps(50):
        ref = mpmath.log(mpmath.mpf(q.numerator) / q.denominator)
        assert mpmath.mpf(iv.lo) <= ref <= mpmath.mpf(iv.hi)


def test_log_of_default_multiplier():
    iv = log_interval(F(21, 20))
    assert iv.lo <= 0.04879016416943205 <= iv.hi
    assert iv.width < 1e-15


@given(st.fractions(min_value=0, max_value=10 ** 6))
def test_sqrt_encloses(q):
    iv = sqrt_interval(q)
    assert F(iv.lo) ** 2 <= q <= F(iv.hi) ** 2


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=1, max_size=300))
def test_cumsum_encloses_exact_partial_sums(xs):
    lo, hi = enclosed_cumsum(np.asarray(xs), np.asarray(xs))
    acc = F(0)
    for i, x in enumerate(xs, 1):
        acc += F(x)
        assert F(lo[i]) <= acc <= F(hi[i])


@given(rationals, st.integers(min_value=8, max_value=200))
def test_fixed_rounding_is_outward(q, k):
    fx = FixedInterval.from_rational(q, k)
    assert fx.lo <= q <= fx.hi
    assert fx.width <= F(1, 1 << k)


@given(rationals, rationals, rationals, st.integers(min_value=16, max_value=120))
def test_fixed_arithmetic_contains_exact(a, b, c, k):
    x = FixedInterval.from_rational(a, k)
    y = FixedInterval.from_rational(b, k)
    for z, exact in ((x + y, a + b), (x - y, a - b), (x * c, a * c), (x * y, a * b), (-x, -a)):
        assert z.lo <= exact <= z.hi


def test_fixed_subset_and_mag():
    x = FixedInterval.from_rational(F(-1, 3), 40)
    assert x.subset_of(F(-1, 2), 0)
    assert not x.subset_of(F(-1, 4), 0)
    assert x.mag_squared_upper() >= F(1, 9)
    with pytest.raises(ValueError):
        x + FixedInterval.from_rational(1, 41)


def test_reciprocal_rejects_zero():
    with pytest.raises(ZeroDivisionError):
        Interval(-1.0, 1.0).reciprocal()
    assert math.isclose((Interval(F(1)) / Interval(F(3))).lo, 1 / 3)
