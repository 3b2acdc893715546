"""Outward-rounded scalar interval arithmetic.

Real intervals carry binary64 endpoints.  After every native operation the
rounding error is recovered exactly with error-free transformations (TwoSum,
Dekker's TwoProduct) and the endpoint is moved one ulp outward only when the
native result is actually inexact.  Exact operations such as ``[1,2]+[3,4]``
therefore stay exact, while every result still encloses the true image set.

Complex intervals are axis-aligned rectangles built from two real intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

Number = Union[int, float]

_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1
# Dekker's split overflows above this magnitude; the error-free product also
# loses exactness for results in the subnormal range.
_SPLIT_MAX = 2.0 ** 996
_PROD_MIN = 2.0 ** -969


class IntervalError(ArithmeticError):
    """Base class for interval failures."""


class DivisionByIntervalContainingZero(IntervalError):
    """Raised when dividing by an interval that contains zero."""


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
    err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    return p, err


def _exact_safe(*xs: float) -> bool:
    return all(math.isfinite(x) and abs(x) < _SPLIT_MAX for x in xs)


def add_down(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    if not math.isfinite(s):
        if s == _INF and math.isfinite(a) and math.isfinite(b):
            return math.nextafter(s, -_INF)
        return s
    return math.nextafter(s, -_INF) if e < 0 else s


def add_up(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    if not math.isfinite(s):
        if s == -_INF and math.isfinite(a) and math.isfinite(b):
            return math.nextafter(s, _INF)
        return s
    return math.nextafter(s, _INF) if e > 0 else s


def mul_down(a: float, b: float) -> float:
    p = a * b
    if not _exact_safe(a, b) or (p != 0.0 and abs(p) < _PROD_MIN) or (p == 0.0 and a != 0.0 and b != 0.0):
        return math.nextafter(p, -_INF)
    _, e = _two_prod(a, b)
    return math.nextafter(p, -_INF) if e < 0 else p


def mul_up(a: float, b: float) -> float:
    p = a * b
    if not _exact_safe(a, b) or (p != 0.0 and abs(p) < _PROD_MIN) or (p == 0.0 and a != 0.0 and b != 0.0):
        return math.nextafter(p, _INF)
    _, e = _two_prod(a, b)
    return math.nextafter(p, _INF) if e > 0 else p


def _div_sign(a: float, b: float, q: float) -> int:
    """Sign of (a/b - q) computed exactly, or 2 when undecidable."""
    if not (_exact_safe(a, b, q) and q != 0.0 and abs(q) >= _PROD_MIN and abs(a) >= _PROD_MIN):
        return 2
    p, e = _two_prod(q, b)
    rem = (a - p) - e
    if rem == 0.0:
        return 0
    s = 1 if rem > 0 else -1
    return s if b > 0 else -s


def div_down(a: float, b: float) -> float:
    q = a / b
    sgn = _div_sign(a, b, q)
    if sgn == 0 or sgn == 1:
        return q
    return math.nextafter(q, -_INF)


def div_up(a: float, b: float) -> float:
    q = a / b
    sgn = _div_sign(a, b, q)
    if sgn == 0 or sgn == -1:
        return q
    return math.nextafter(q, _INF)


def sqrt_down(v: float) -> float:
    if v <= 0.0:
        return 0.0
    s = math.sqrt(v)
    if _exact_safe(s) and s * s >= _PROD_MIN:
        p, e = _two_prod(s, s)
        if p < v or (p == v and e <= 0):
            return s
    return math.nextafter(s, -_INF)


def sqrt_up(v: float) -> float:
    if v <= 0.0:
        return 0.0
    s = math.sqrt(v)
    if _exact_safe(s) and s * s >= _PROD_MIN:
        p, e = _two_prod(s, s)
        if p > v or (p == v and e >= 0):
            return s
    return math.nextafter(s, _INF)


@dataclass(frozen=True)
class ScalarInterval:
    """Closed real interval ``[lo, hi]`` with binary64 endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("NaN endpoint")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: Number) -> "ScalarInterval":
        return cls(float(x), float(x))

    @classmethod
    def hull(cls, *xs: "ScalarInterval | Number") -> "ScalarInterval":
        ivs = [_as_iv(x) for x in xs]
        return cls(min(i.lo for i in ivs), max(i.hi for i in ivs))

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def mid(self) -> float:
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def rad(self) -> float:
        """Upper bound on the distance from ``mid`` to either endpoint."""
        m = self.mid
        return max(add_up(self.hi, -m), add_up(m, -self.lo))

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, ScalarInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def __neg__(self) -> "ScalarInterval":
        return ScalarInterval(-self.hi, -self.lo)

    def __add__(self, other) -> "ScalarInterval":
        b = _as_iv(other)
        return ScalarInterval(add_down(self.lo, b.lo), add_up(self.hi, b.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarInterval":
        return self + (-_as_iv(other))

    def __rsub__(self, other) -> "ScalarInterval":
        return _as_iv(other) - self

    def __mul__(self, other) -> "ScalarInterval":
        b = _as_iv(other)
        pairs = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)]
        lo = min(mul_down(x, y) for x, y in pairs)
        hi = max(mul_up(x, y) for x, y in pairs)
        return ScalarInterval(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScalarInterval":
        b = _as_iv(other)
        if b.lo <= 0.0 <= b.hi:
            raise DivisionByIntervalContainingZero(f"divisor {b} contains 0")
        pairs = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)]
        lo = min(div_down(x, y) for x, y in pairs)
        hi = max(div_up(x, y) for x, y in pairs)
        return ScalarInterval(lo, hi)

    def __rtruediv__(self, other) -> "ScalarInterval":
        return _as_iv(other) / self

    def __pow__(self, p: int) -> "ScalarInterval":
        return iv_pow_int(self, p)

    def sqr(self) -> "ScalarInterval":
        lo = self.mig
        return ScalarInterval(mul_down(lo, lo), mul_up(self.mag, self.mag))

    def sqrt(self) -> "ScalarInterval":
        if self.hi < 0:
            raise ValueError("sqrt of a negative interval")
        return ScalarInterval(sqrt_down(max(self.lo, 0.0)), sqrt_up(self.hi))

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


def _as_iv(x) -> ScalarInterval:
    if isinstance(x, ScalarInterval):
        return x
    if isinstance(x, (int, float)):
        return ScalarInterval.point(x)
    raise TypeError(f"cannot convert {type(x).__name__} to ScalarInterval")


def iv_add(a: ScalarInterval, b: ScalarInterval) -> ScalarInterval:
    return a + b


def iv_mul(a: ScalarInterval, b: ScalarInterval) -> ScalarInterval:
    return a * b


def iv_div(a: ScalarInterval, b: ScalarInterval) -> ScalarInterval:
    return a / b


def iv_pow_int(a: ScalarInterval, p: int) -> ScalarInterval:
    """Integer power; even powers return an interval with ``lo >= 0``."""
    if not isinstance(p, int):
        raise TypeError("integer exponent required")
    if p < 0:
        return ScalarInterval.point(1.0) / iv_pow_int(a, -p)
    if p == 0:
        return ScalarInterval.point(1.0)
    if p % 2 == 0:
        base = a.sqr()
        out = ScalarInterval.point(1.0)
        for _ in range(p // 2):
            out = ScalarInterval(mul_down(out.lo, base.lo), mul_up(out.hi, base.hi))
        return out
    out = a
    for _ in range(p - 1):
        out = out * a
    return out


@dataclass(frozen=True)
class ComplexInterval:
    """Rectangle ``re + i*im`` in the complex plane."""

    re: ScalarInterval
    im: ScalarInterval

    @classmethod
    def point(cls, z: complex) -> "ComplexInterval":
        z = complex(z)
        return cls(ScalarInterval.point(z.real), ScalarInterval.point(z.imag))

    @classmethod
    def from_bounds(cls, re_lo, re_hi, im_lo=0.0, im_hi=0.0) -> "ComplexInterval":
        return cls(ScalarInterval(re_lo, re_hi), ScalarInterval(im_lo, im_hi))

    @classmethod
    def hull(cls, *zs: "ComplexInterval") -> "ComplexInterval":
        zs = [_as_civ(z) for z in zs]
        return cls(ScalarInterval.hull(*[z.re for z in zs]), ScalarInterval.hull(*[z.im for z in zs]))

    @property
    def mid(self) -> complex:
        return complex(self.re.mid, self.im.mid)

    @property
    def is_finite(self) -> bool:
        return self.re.is_finite and self.im.is_finite

    def contains(self, z) -> bool:
        if isinstance(z, ComplexInterval):
            return self.re.contains(z.re) and self.im.contains(z.im)
        z = complex(z)
        return self.re.contains(z.real) and self.im.contains(z.imag)

    def __contains__(self, z) -> bool:
        return self.contains(z)

    def conj(self) -> "ComplexInterval":
        return ComplexInterval(self.re, -self.im)

    def __neg__(self) -> "ComplexInterval":
        return ComplexInterval(-self.re, -self.im)

    def __add__(self, other) -> "ComplexInterval":
        b = _as_civ(other)
        return ComplexInterval(self.re + b.re, self.im + b.im)

    __radd__ = __add__

    def __sub__(self, other) -> "ComplexInterval":
        b = _as_civ(other)
        return ComplexInterval(self.re - b.re, self.im - b.im)

    def __rsub__(self, other) -> "ComplexInterval":
        return _as_civ(other) - self

    def __mul__(self, other) -> "ComplexInterval":
        b = _as_civ(other)
        re = self.re * b.re - self.im * b.im
        im = self.re * b.im + self.im * b.re
        return ComplexInterval(re, im)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ComplexInterval":
        b = _as_civ(other)
        if magnitude_lower(b) <= 0.0:
            raise DivisionByIntervalContainingZero(f"divisor {b} may vanish")
        den = b.re.sqr() + b.im.sqr()
        num = self * b.conj()
        return ComplexInterval(num.re / den, num.im / den)

    def __rtruediv__(self, other) -> "ComplexInterval":
        return _as_civ(other) / self

    def __pow__(self, p: int) -> "ComplexInterval":
        if p < 0:
            return ComplexInterval.point(1.0) / self ** (-p)
        out = ComplexInterval.point(1.0)
        for _ in range(p):
            out = out * self
        return out

    def __repr__(self) -> str:
        return f"({self.re!r} + i{self.im!r})"


def _as_civ(x) -> ComplexInterval:
    if isinstance(x, ComplexInterval):
        return x
    if isinstance(x, ScalarInterval):
        return ComplexInterval(x, ScalarInterval.point(0.0))
    if isinstance(x, (int, float, complex)):
        return ComplexInterval.point(x)
    raise TypeError(f"cannot convert {type(x).__name__} to ComplexInterval")


def civ_add(a, b) -> ComplexInterval:
    return _as_civ(a) + b


def civ_sub(a, b) -> ComplexInterval:
    return _as_civ(a) - b


def civ_mul(a, b) -> ComplexInterval:
    return _as_civ(a) * b


def civ_div(a, b) -> ComplexInterval:
    return _as_civ(a) / b


def magnitude_upper(z: ComplexInterval) -> float:
    """Upward-rounded bound on ``sup |w|`` over the rectangle (max corner)."""
    z = _as_civ(z)
    x, y = z.re.mag, z.im.mag
    return sqrt_up(add_up(mul_up(x, x), mul_up(y, y)))


def magnitude_lower(z: ComplexInterval) -> float:
    """Downward-rounded distance from 0 to the rectangle."""
    z = _as_civ(z)
    x, y = z.re.mig, z.im.mig
    return sqrt_down(add_down(mul_down(x, x), mul_down(y, y)))
