import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kshopf.interval import (
    ComplexInterval,
    DivisionByIntervalContainingZero,
    ScalarInterval,
    add_down,
    add_up,
    div_down,
    div_up,
    magnitude_lower,
    magnitude_upper,
    mul_down,
    mul_up,
    sqrt_down,
    sqrt_up,
)

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-12, max_value=1e12)


def iv(a, b):
    return ScalarInterval(min(a, b), max(a, b))


def test_exact_sum_stays_thin():
    r = ScalarInterval(1, 2) + ScalarInterval(3, 4)
    assert (r.lo, r.hi) == (4.0, 6.0)


def test_inexact_sum_is_widened():
    r = ScalarInterval.point(0.1) + ScalarInterval.point(0.2)
    assert r.lo < r.hi
    assert F(r.lo) <= F(0.1) + F(0.2) <= F(r.hi)


def test_division_by_zero_interval_raises():
    with pytest.raises(DivisionByIntervalContainingZero):
        ScalarInterval(1, 2) / ScalarInterval(-1, 1)


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        ScalarInterval(2, 1)


def test_square_of_straddling_interval_is_nonnegative():
    r = ScalarInterval(-2, 3).sqr()
    assert r.lo == 0.0 and r.hi == 9.0


@given(finite, finite)
def test_directed_add(a, b):
    exact = F(a) + F(b)
    assert F(add_down(a, b)) <= exact <= F(add_up(a, b))


@given(finite, finite)
def test_directed_mul(a, b):
    exact = F(a) * F(b)
    assert F(mul_down(a, b)) <= exact <= F(mul_up(a, b))


@given(finite, positive)
def test_directed_div(a, b):
    exact = F(a) / F(b)
    assert F(div_down(a, b)) <= exact <= F(div_up(a, b))


@given(positive)
def test_directed_sqrt(a):
    lo, hi = sqrt_down(a), sqrt_up(a)
    assert F(lo) ** 2 <= F(a) <= F(hi) ** 2


@given(finite, finite, finite, finite, st.floats(0, 1), st.floats(0, 1))
def test_mul_contains_products(a, b, c, d, s, t):
    x, y = iv(a, b), iv(c, d)
    px = F(x.lo) + F(s) * (F(x.hi) - F(x.lo))
    py = F(y.lo) + F(t) * (F(y.hi) - F(y.lo))
    r = x * y
    assert F(r.lo) <= px * py <= F(r.hi)


@settings(max_examples=200)
@given(finite, finite, finite, finite)
def test_complex_magnitude_bounds(a, b, c, d):
    z = ComplexInterval(iv(a, b), iv(c, d))
    lo, hi = magnitude_lower(z), magnitude_upper(z)
    assert 0 <= lo <= hi
    for x in (z.re.lo, z.re.hi):
        for y in (z.im.lo, z.im.hi):
            assert lo <= math.hypot(x, y) * (1 + 1e-15) and math.hypot(x, y) <= hi * (1 + 1e-15)


def test_complex_hull_and_contains():
    a = ComplexInterval.point(1 + 2j)
    b = ComplexInterval.point(-1 - 1j)
    h = ComplexInterval.hull(a, b)
    assert h.contains(0j) and h.contains(a) and not h.contains(3j)
