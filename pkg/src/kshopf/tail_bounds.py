"""Sup bounds for diagonal operators whose entries are rational in (j, k).

A symbol is ``num(k) / den(j, k)`` with

    num(k)    = sum_p c_p k^p                  (p in {0, 1, 2, 4})
    den(j, k) = e*i*j + alpha k^4 + beta k^2 + c1 k + gamma   (e in {0, 1})

acting on the modes outside a truncation ``(M, N)``.  Because a diagonal
operator leaves the weights invariant, its operator norm on a weighted l1
space equals the sup of the entry magnitudes over the tail.  The bound is the
max of an interval scan over ``N < |k| <= n_scan`` (for every j), a
per-k treatment of ``|j| > M`` and an analytic domination bound for
``|k| > n_scan``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ball import U, Ball, down, up

_POWERS = (0, 1, 2, 4)


class DenominatorMayVanish(ArithmeticError):
    """Some tail index has a denominator whose lower bound is not positive."""


class NonDominantDenominator(ArithmeticError):
    """The leading power of the denominator does not dominate beyond the scan."""


def _scalar_ball(c) -> Ball:
    b = Ball.coerce(c)
    return b.reshape(())


def _kpow(k: np.ndarray, p: int) -> Ball:
    kp = np.asarray(k, dtype=float) ** p
    rad = np.where(np.abs(kp) > 2.0 ** 53, np.abs(kp) * 2 * U, 0.0)
    return Ball(kp, rad)


@dataclass(frozen=True)
class PolySymbol:
    """``e*i*J + sum_p coef[p] * K^p`` with ball coefficients."""

    coef: dict = field(default_factory=dict)
    e: int = 0

    def __post_init__(self):
        clean = {}
        for p, c in self.coef.items():
            if p not in _POWERS:
                raise ValueError(f"unsupported power K^{p}")
            b = _scalar_ball(c)
            if b.mid != 0 or b.rad != 0:
                clean[p] = b
        object.__setattr__(self, "coef", clean)
        if self.e not in (0, 1):
            raise ValueError("e must be 0 or 1")

    @classmethod
    def const(cls, c=1.0) -> "PolySymbol":
        return cls({0: c})

    @property
    def degree(self) -> int:
        return max(self.coef) if self.coef else -1

    def k_part(self, k) -> Ball:
        """The ``K``-only part evaluated at integer array ``k``."""
        k = np.asarray(k)
        out = Ball.zeros(k.shape)
        for p, c in sorted(self.coef.items()):
            out = out + _kpow(k, p) * c
        return out

    def value(self, j, k) -> Ball:
        v = self.k_part(k)
        if self.e:
            v = v + Ball(1j * np.asarray(j, dtype=float))
        return v

    def scaled(self, s) -> "PolySymbol":
        return PolySymbol({p: c * s for p, c in self.coef.items()}, self.e)


@dataclass(frozen=True)
class RationalDiagonalSymbol:
    """``num / den`` acting beyond the truncation ``K``.

    ``space`` is ``"1d"`` (tail ``|k| > N`` of l1_{nu2}) or ``"2d"`` (indices
    with ``|j| > M`` or ``|k| > N`` of l1_{nu1,nu2}).
    """

    num: PolySymbol
    den: PolySymbol
    K: tuple
    space: str = "2d"

    def __post_init__(self):
        if self.space not in ("1d", "2d"):
            raise ValueError("space must be '1d' or '2d'")
        if self.num.e:
            raise ValueError("numerators with an iJ term are not supported")
        if self.space == "1d" and self.den.e:
            raise ValueError("iJ term in a one-dimensional symbol")

    def entry(self, j, k) -> Ball:
        return self.num.value(j, k) * self.den.value(j, k).inv()


def _mig(lo, hi):
    return np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))


def _hypot_down(a, b):
    return np.sqrt(np.maximum(down(down(a * a, 2) + down(b * b, 2), 2), 0.0)) * (1 - 2 * U)


def _dist_to_integers(lo, hi):
    """Lower bound on the distance from ``[lo, hi]`` to the integers."""
    fl = np.floor(lo)
    contains = np.floor(hi) > fl
    d = np.minimum(lo - fl, fl + 1 - hi)
    return np.where(contains | (d <= 0), 0.0, down(d, 4))


def _den_lower_all_j(den: PolySymbol, k: np.ndarray, two_d: bool) -> np.ndarray:
    D = den.k_part(k)
    if not (den.e and two_d):
        return D.abslo()
    rlo, rhi = D.real_bounds()
    ilo, ihi = D.imag_bounds()
    return _hypot_down(_mig(rlo, rhi), _dist_to_integers(ilo, ihi))


def _den_lower_jtail(den: PolySymbol, k: np.ndarray, M: int) -> np.ndarray:
    D = den.k_part(k)
    if not den.e:
        return D.abslo()
    rlo, rhi = D.real_bounds()
    ilo, ihi = D.imag_bounds()
    im_mag = np.maximum(np.abs(ilo), np.abs(ihi))
    gap = np.maximum(down((M + 1) - im_mag, 4), 0.0)
    return _hypot_down(_mig(rlo, rhi), gap)


def _sign_check(den: PolySymbol, k: np.ndarray) -> None:
    """Reject real parts whose sign differs from the leading term's on either side of the k-tail."""
    d = den.degree
    lead = den.coef[d]
    sgn = np.sign(lead.mid.real)
    if sgn == 0:
        return
    D = den.k_part(k)
    rlo, rhi = D.real_bounds()
    expect = sgn * np.where(k < 0, (-1.0) ** d, 1.0)
    bad = np.where(expect > 0, rhi < 0, rlo > 0)
    if np.any(bad):
        raise DenominatorMayVanish("denominator real part changes sign in the tail")


def _remainder_bound(sym: RationalDiagonalSymbol, k0: int) -> float:
    den, num = sym.den, sym.num
    d = den.degree
    if d < 0 or num.degree > d:
        raise NonDominantDenominator("numerator degree exceeds denominator degree")
    use_real = bool(den.e and sym.space == "2d")

    def mag(c: Ball, lower: bool) -> float:
        if use_real:
            lo, hi = c.real_bounds()
            return float(_mig(lo, hi)) if lower else float(max(abs(lo), abs(hi)))
        return float(c.abslo()) if lower else float(c.absup())

    lead = mag(den.coef[d], True)
    sub = 0.0
    for q, c in den.coef.items():
        if q < d:
            sub += mag(c, False) * float(k0) ** (q - d)
    lower = float(down(lead - up(sub, 8), 8))
    if lower <= 0.0:
        raise NonDominantDenominator(f"leading K^{d} term does not dominate at k={k0}")
    top = 0.0
    for p, c in num.coef.items():
        top += float(c.absup()) * float(k0) ** (p - d)
    return float(up(up(top, 8) / lower, 4))


def tail_norm_bound(sym: RationalDiagonalSymbol, n_scan: int | None = None) -> float:
    """Upper bound on ``sup |num/den|`` over the tail of ``sym``."""
    M, N = sym.K
    two_d = sym.space == "2d"
    n_scan = max(4 * N, 128) if n_scan is None else max(int(n_scan), N + 1)
    best = 0.0

    ks = np.concatenate([np.arange(N + 1, n_scan + 1), -np.arange(N + 1, n_scan + 1)])
    lower = _den_lower_all_j(sym.den, ks, two_d)
    if np.any(lower <= 0.0):
        bad = ks[np.argmax(lower <= 0.0)]
        raise DenominatorMayVanish(f"denominator may vanish at k={bad}")
    if sym.den.degree >= 0:
        _sign_check(sym.den, ks)
    top = sym.num.k_part(ks).absup()
    best = max(best, float(np.max(up(top / lower, 4))))

    best = max(best, _remainder_bound(sym, n_scan + 1))

    if two_d:
        kk = np.arange(-N, N + 1)
        lower = _den_lower_jtail(sym.den, kk, M)
        top = sym.num.k_part(kk).absup()
        if np.any((lower <= 0.0) & (top > 0.0)):
            bad = kk[np.argmax((lower <= 0.0) & (top > 0.0))]
            raise DenominatorMayVanish(f"denominator may vanish for |j|>{M}, k={bad}")
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(top > 0.0, up(top / np.where(lower > 0, lower, 1.0), 4), 0.0)
        best = max(best, float(np.max(r)))
    return best


def verify_denominator_nonvanishing(sym: RationalDiagonalSymbol, n_scan: int | None = None) -> bool:
    """True iff the denominator is bounded away from 0 on the whole tail."""
    if sym.den.degree < 0 and not sym.den.e:
        return False
    probe = RationalDiagonalSymbol(PolySymbol.const(1.0), sym.den, sym.K, sym.space)
    try:
        if sym.den.degree < 0:
            # pure iJ: only the j-tail can be nonzero; k-tail at j=0 vanishes
            return False
        tail_norm_bound(probe, n_scan)
    except (DenominatorMayVanish, NonDominantDenominator):
        return False
    return True
