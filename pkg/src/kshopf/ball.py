"""Vectorised complex ball arithmetic (midpoint-radius enclosures).

A :class:`Ball` array stores a complex midpoint array and a nonnegative radius
array; element ``i`` encloses the disc ``{w : |w - mid[i]| <= rad[i]}``.  Every
operation returns a ball containing all exact results for point inputs drawn
from the operands.  Floating-point error in the midpoint is absorbed into the
radius using standard a-priori bounds (gamma_n style); radius arithmetic itself
is inflated by a relative margin and one ulp upward.

Matrix products use BLAS for speed; the error bound is independent of the
summation order, so any BLAS blocking is covered.  Convolutions are direct sums
(no FFT).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import signal

from .interval import ComplexInterval, ScalarInterval, add_up, sqrt_up

U = 2.0 ** -53
ETA = 2.0 ** -1074
_INF = np.inf


def up(x, k: float = 16.0):
    """Inflate a nonnegative float array computed with a few roundings."""
    return np.nextafter(np.asarray(x, dtype=float) * (1.0 + k * U), _INF)


def down(x, k: float = 16.0):
    x = np.asarray(x, dtype=float)
    return np.nextafter(x * (1.0 - k * U), -_INF)


def sum_up(x, axis=None):
    """Upper bound of a sum of nonnegative floats."""
    x = np.asarray(x, dtype=float)
    n = x.size if axis is None else x.shape[axis]
    s = np.sum(x, axis=axis)
    return up(s * (1.0 + 2.0 * (n + 2) * U))


def matmul_up(a, b):
    """Upper bound of the product of two nonnegative float matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[-1]
    return up((a @ b) * (1.0 + 2.0 * (n + 2) * U)) + n * ETA


def max_up(*xs):
    out = np.asarray(xs[0], dtype=float)
    for x in xs[1:]:
        out = np.maximum(out, x)
    return out


@lru_cache(maxsize=256)
def _power_table(nu: float, n: int, direction: int) -> np.ndarray:
    out = np.empty(n + 1)
    out[0] = 1.0
    tgt = _INF if direction > 0 else -_INF
    for k in range(1, n + 1):
        out[k] = np.nextafter(out[k - 1] * nu, tgt)
    out.setflags(write=False)
    return out


def weight_table(nu: float, n: int, upper: bool = True) -> np.ndarray:
    """Bounds on ``nu**k`` for ``k = 0..n`` (upper or lower)."""
    return _power_table(float(nu), int(n), 1 if upper else -1)


def _lohi(m, r):
    """Directed bounds of the real interval ``[m - r, m + r]``."""
    m = np.asarray(m, dtype=float)
    slack = 4 * U * (np.abs(m) + r) + ETA
    return np.nextafter(m - r - slack, -_INF), np.nextafter(m + r + slack, _INF)


class Ball:
    """Array of complex discs."""

    __slots__ = ("mid", "rad")
    __array_priority__ = 100

    def __init__(self, mid, rad=None):
        mid = np.asarray(mid, dtype=complex)
        if rad is None:
            rad = np.zeros(mid.shape)
        else:
            rad = np.asarray(rad, dtype=float)
            if rad.shape != mid.shape:
                rad = np.broadcast_to(rad, mid.shape).copy()
        if np.isnan(mid).any() or np.isnan(rad).any():
            raise FloatingPointError("NaN in ball arithmetic")
        self.mid = mid
        self.rad = rad

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, shape) -> "Ball":
        return cls(np.zeros(shape, dtype=complex))

    @classmethod
    def thin(cls, x) -> "Ball":
        if isinstance(x, Ball):
            return x
        return cls(x)

    @classmethod
    def from_interval(cls, z) -> "Ball":
        """Disc enclosing a real or complex rectangle."""
        if isinstance(z, ScalarInterval):
            z = ComplexInterval(z, ScalarInterval.point(0.0))
        m = z.mid
        dx = max(add_up(z.re.hi, -m.real), add_up(m.real, -z.re.lo))
        dy = max(add_up(z.im.hi, -m.imag), add_up(m.imag, -z.im.lo))
        r = sqrt_up(add_up(dx * dx, dy * dy) * (1 + 4 * U)) if (dx or dy) else 0.0
        return cls(np.asarray(m), np.asarray(r))

    @classmethod
    def coerce(cls, x) -> "Ball":
        if isinstance(x, Ball):
            return x
        if isinstance(x, (ScalarInterval, ComplexInterval)):
            return cls.from_interval(x)
        return cls(x)

    # array protocol ---------------------------------------------------
    @property
    def shape(self):
        return self.mid.shape

    @property
    def ndim(self):
        return self.mid.ndim

    @property
    def size(self):
        return self.mid.size

    def __len__(self):
        return len(self.mid)

    def __getitem__(self, idx) -> "Ball":
        return Ball(self.mid[idx], self.rad[idx])

    def copy(self) -> "Ball":
        return Ball(self.mid.copy(), np.array(self.rad, dtype=float))

    def reshape(self, *shape) -> "Ball":
        m = self.mid.reshape(*shape)
        return Ball(m, self.rad.reshape(m.shape))

    @property
    def T(self) -> "Ball":
        return Ball(self.mid.T, self.rad.T)

    @property
    def is_thin(self) -> bool:
        return not np.any(self.rad)

    def to_interval(self) -> ComplexInterval:
        """Rectangle enclosing a scalar ball."""
        if self.size != 1:
            raise ValueError("to_interval requires a scalar ball")
        m = complex(self.mid.reshape(-1)[0])
        r = float(np.reshape(self.rad, -1)[0])
        if r == 0.0:
            return ComplexInterval.point(m)
        (rl, rh), (il, ih) = _lohi(m.real, r), _lohi(m.imag, r)
        return ComplexInterval(ScalarInterval(float(rl), float(rh)), ScalarInterval(float(il), float(ih)))

    def contains(self, pts, slack: float = 0.0) -> bool:
        pts = np.asarray(pts, dtype=complex)
        return bool(np.all(np.abs(pts - self.mid) <= self.rad * (1 + slack) + 4 * U * np.abs(pts)))

    # magnitudes -------------------------------------------------------
    def absup(self) -> np.ndarray:
        """Upper bound of ``|w|`` over each disc."""
        return up(np.abs(self.mid) + self.rad, 4)

    def abslo(self) -> np.ndarray:
        """Lower bound of ``|w|`` over each disc (clipped at 0)."""
        t = np.nextafter(np.abs(self.mid) * (1 - 4 * U) - self.rad, -_INF)
        return np.maximum(t * (1 - 2 * U), 0.0)

    def real_bounds(self):
        return _lohi(self.mid.real, self.rad)

    def imag_bounds(self):
        return _lohi(self.mid.imag, self.rad)

    # arithmetic -------------------------------------------------------
    def __neg__(self) -> "Ball":
        return Ball(-self.mid, self.rad)

    def conj(self) -> "Ball":
        return Ball(np.conj(self.mid), self.rad)

    def __add__(self, other) -> "Ball":
        o = Ball.coerce(other)
        m = self.mid + o.mid
        return Ball(m, up(self.rad + o.rad + 2 * U * np.abs(m)))

    __radd__ = __add__

    def __sub__(self, other) -> "Ball":
        o = Ball.coerce(other)
        m = self.mid - o.mid
        return Ball(m, up(self.rad + o.rad + 2 * U * np.abs(m)))

    def __rsub__(self, other) -> "Ball":
        return Ball.coerce(other) - self

    def __mul__(self, other) -> "Ball":
        o = Ball.coerce(other)
        m = self.mid * o.mid
        r = np.abs(self.mid) * o.rad + self.rad * (np.abs(o.mid) + o.rad) + 4 * U * np.abs(m)
        return Ball(m, up(r + 8 * ETA))

    __rmul__ = __mul__

    def inv(self) -> "Ball":
        lo = self.abslo()
        if np.any(lo <= 0.0):
            raise ZeroDivisionError("ball may contain 0")
        with np.errstate(over="ignore"):
            m = 1.0 / self.mid
            den = down(lo * down(lo + self.rad, 2), 2)
            r = self.rad / den + 8 * U * np.abs(m)
        return Ball(m, up(r + 8 * ETA))

    def __truediv__(self, other) -> "Ball":
        return self * Ball.coerce(other).inv()

    def __rtruediv__(self, other) -> "Ball":
        return Ball.coerce(other) * self.inv()

    def scale_real(self, w) -> "Ball":
        """Multiply by an exactly known nonnegative real array ``w``."""
        w = np.asarray(w, dtype=float)
        m = self.mid * w
        return Ball(m, up(self.rad * w + 2 * U * np.abs(m) + 8 * ETA))

    def sum(self, axis=None) -> "Ball":
        n = self.size if axis is None else self.shape[axis]
        m = np.sum(self.mid, axis=axis)
        r = sum_up(self.rad, axis) + 2.0 * (n + 1) * U * sum_up(np.abs(self.mid), axis)
        return Ball(m, up(r))

    def hull(self, other) -> "Ball":
        o = Ball.coerce(other)
        c = 0.5 * self.mid + 0.5 * o.mid
        r = np.maximum(np.abs(self.mid - c) + self.rad, np.abs(o.mid - c) + o.rad)
        return Ball(c, up(r + 8 * ETA * (r > 0)))

    def __matmul__(self, other) -> "Ball":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Ball(mid={self.mid!r}, rad={self.rad!r})"


def _stack(parts, axis=0) -> Ball:
    return Ball(np.concatenate([p.mid for p in parts], axis=axis),
                np.concatenate([np.broadcast_to(p.rad, p.shape) for p in parts], axis=axis))


concatenate = _stack


def matmul(a, b) -> Ball:
    """Enclosure of ``a @ b`` for ball matrices/vectors."""
    a = Ball.coerce(a)
    b = Ball.coerce(b)
    n = a.shape[-1]
    m = a.mid @ b.mid
    am = np.abs(a.mid)
    bm = np.abs(b.mid)
    r = (3.0 * (n + 4) * U) * (am @ bm)
    if not b.is_thin:
        r = r + am @ b.rad
    if not a.is_thin:
        r = r + a.rad @ (bm + b.rad)
    r = up(r * (1.0 + 2.0 * (n + 4) * U)) + 4 * n * ETA
    return Ball(m, r)


def _conv(x, y):
    return signal.convolve(x, y, mode="full", method="direct")


def convolve(a, b) -> Ball:
    """Full (centered) discrete convolution of two ball arrays of equal ndim."""
    a = Ball.coerce(a)
    b = Ball.coerce(b)
    n = min(a.size, b.size)
    m = _conv(a.mid, b.mid)
    am = np.abs(a.mid)
    bm = np.abs(b.mid)
    r = (3.0 * (n + 4) * U) * _conv(am, bm)
    if not b.is_thin:
        r = r + _conv(am, b.rad)
    if not a.is_thin:
        r = r + _conv(a.rad, bm + b.rad)
    r = up(np.maximum(r, 0.0) * (1.0 + 2.0 * (n + 4) * U)) + 4 * n * ETA
    return Ball(m, r)


def pad_center(x: Ball, shape) -> Ball:
    """Zero-pad (or crop) a centered array to ``shape`` (odd sizes)."""
    x = Ball.coerce(x)
    out_m = np.zeros(shape, dtype=complex)
    out_r = np.zeros(shape)
    src, dst = [], []
    for s_old, s_new in zip(x.shape, shape):
        h_old, h_new = s_old // 2, s_new // 2
        h = min(h_old, h_new)
        src.append(slice(h_old - h, h_old + h + 1))
        dst.append(slice(h_new - h, h_new + h + 1))
    out_m[tuple(dst)] = x.mid[tuple(src)]
    out_r[tuple(dst)] = np.broadcast_to(x.rad, x.shape)[tuple(src)]
    return Ball(out_m, out_r)
