"""The Kuramoto-Sivashinsky Hopf blow-up problem.

Unknowns ``x = (lambda1, lambda2, a, y, z)``; the problem is

    F1 = lambda2 K^4 y - K^2 y - iK (y*y)
    F2 = iJ z + lambda1 lambda2 K^4 z - lambda1 K^2 z - lambda1 iK (2 E y*z + a z*z)
    G1 = <J^2 conj(zh), z> - 1        G2 = <iK yh, y>
    G3 = <iK (E yh + ah zh), z>       G4 = <iJ zh, z>
    E  = <x, q> - c                  (continuation equation)

with anchors ``xh = (.., ah, yh, zh)``.  ``<u, w>`` is the bilinear pairing
``sum u w``.  ``(F1)_0`` and ``(F2)_00`` vanish identically; the residual
vector puts ``(E, G1, G4)`` in the three scalar slots, ``G2`` in the y slot at
k=0 and ``G3`` in the z slot at (0,0).

Derivatives are organised through a coefficient tuple: the Jacobian is
``DH(x) = L_const + L(c(x))`` with ``L`` linear in the coefficients ``c``.
Evaluating ``c`` along a curve ``s -> (x(s), anchors(s))`` with second-order
jets gives ``d/ds DH = L(c')`` and ``d^2/ds^2 DH = L(c'')``; the same jets with
a straight line ``x + t w`` give ``D^2H(x)[w]`` and ``D^3H(x)[w, w]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ball import Ball, convolve, matmul, pad_center
from .operators import (
    DiagonalTail,
    EventuallyDiagonalOperator,
    FiniteBlockOperator,
    TailTerm,
    conv_matrix,
)
from .sequences import Layout, Seq1D, Seq2D, XVector, conjugate, is_symmetric
from .tail_bounds import PolySymbol, RationalDiagonalSymbol, verify_denominator_nonvanishing

MODES = ("parameter_in_a", "pseudo_arclength")


class TailMayVanish(ArithmeticError):
    """A diagonal tail symbol may vanish."""


# jets ------------------------------------------------------------------------

def _padd(a: Ball, b: Ball, sign: int = 1) -> Ball:
    if a.shape != b.shape:
        shape = tuple(max(p, q) for p, q in zip(a.shape, b.shape))
        a, b = pad_center(a, shape), pad_center(b, shape)
    return a + b if sign > 0 else a - b


class Jet:
    """Value with first and second derivative; ``None`` means zero."""

    __slots__ = ("v", "d", "dd")

    def __init__(self, v, d=None, dd=None):
        self.v = v
        self.d = d
        self.dd = dd

    def _comb(self, other, sign):
        def f(a, b):
            if a is None:
                return b if (b is None or sign > 0) else -b
            if b is None:
                return a
            return _padd(a, b, sign)
        return Jet(f(self.v, other.v), f(self.d, other.d), f(self.dd, other.dd))

    def __add__(self, other):
        return self._comb(other, 1)

    def __sub__(self, other):
        return self._comb(other, -1)

    def __neg__(self):
        return self.map(lambda a: -a)

    def map(self, f):
        return Jet(*(None if a is None else f(a) for a in (self.v, self.d, self.dd)))

    def bilinear(self, other, op):
        def o(a, b):
            return None if (a is None or b is None) else op(a, b)

        def s(*xs):
            xs = [x for x in xs if x is not None]
            if not xs:
                return None
            out = xs[0]
            for x in xs[1:]:
                out = _padd(out, x)
            return out
        v = o(self.v, other.v)
        d = s(o(self.d, other.v), o(self.v, other.d))
        cross = o(self.d, other.d)
        dd = s(o(self.dd, other.v), None if cross is None else cross + cross, o(self.v, other.dd))
        return Jet(v, d, dd)

    def __mul__(self, other):
        return self.bilinear(other, lambda a, b: a * b)

    def conv(self, other):
        return self.bilinear(other, lambda a, b: convolve(a, b))


def _kfac(shape, p: int, factor: complex = 1.0) -> np.ndarray:
    n = shape[-1] // 2
    k = np.arange(-n, n + 1, dtype=float)
    return factor * k ** p


def _jfac(shape, p: int, factor: complex = 1.0) -> np.ndarray:
    m = shape[0] // 2
    j = np.arange(-m, m + 1, dtype=float)
    return (factor * j ** p)[:, None]


def kmul(p: int, factor: complex = 1.0):
    return lambda a: a * Ball(np.broadcast_to(_kfac(a.shape, p, factor), a.shape))


def jmul(p: int, factor: complex = 1.0):
    return lambda a: a * Ball(np.broadcast_to(_jfac(a.shape, p, factor), a.shape))


def embed(a: Ball) -> Ball:
    return a.reshape(1, -1)


def _const_jet(b) -> Jet:
    return Jet(Ball.coerce(b))


# anchors ---------------------------------------------------------------------

@dataclass
class ProblemAnchors:
    """Endpoint anchors of a segment and its continuation equations."""

    xhat0: XVector
    xhat1: XVector
    q0: XVector
    q1: XVector
    c0: complex
    c1: complex
    mode: str = "parameter_in_a"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def parameter_in_a(cls, xhat0: XVector, xhat1: XVector | None = None) -> "ProblemAnchors":
        xhat1 = xhat0 if xhat1 is None else xhat1
        if xhat1 is not xhat0 and complex(xhat0.a.mid) == complex(xhat1.a.mid):
            raise ValueError("parameter continuation in a needs a_0 != a_1")
        q = a_covector(xhat0)
        return cls(xhat0, xhat1, q, q, complex(xhat0.a.mid), complex(xhat1.a.mid), "parameter_in_a")

    @classmethod
    def single(cls, xhat: XVector, q: XVector, c: complex, mode: str) -> "ProblemAnchors":
        return cls(xhat, xhat, q, q, c, c, mode)

    @property
    def K(self) -> tuple[int, int]:
        return (self.xhat0.z.M, self.xhat0.z.N)

    @property
    def degenerate(self) -> bool:
        return self.xhat0 is self.xhat1 and self.q0 is self.q1 and self.c0 == self.c1

    def endpoint(self, sigma: int) -> "ProblemAnchors":
        x = self.xhat1 if sigma else self.xhat0
        q = self.q1 if sigma else self.q0
        c = self.c1 if sigma else self.c0
        return ProblemAnchors(x, x, q, q, c, c, self.mode)

    def x_delta(self) -> XVector:
        return self.xhat1 - self.xhat0


def a_covector(like: XVector) -> XVector:
    M, N = like.z.M, like.z.N
    return XVector(0.0, 0.0, 1.0, Seq1D.zeros(N, like.nu2), Seq2D.zeros(M, N, like.nu1, like.nu2))


@dataclass
class XJet:
    """Jets of the five components of a point of X."""

    l1: Jet
    l2: Jet
    a: Jet
    y: Jet
    z: Jet

    @classmethod
    def point(cls, x: XVector) -> "XJet":
        return cls(Jet(x.lambda1), Jet(x.lambda2), Jet(x.a), Jet(x.y.coef), Jet(x.z.coef))

    @classmethod
    def line(cls, x: XVector, w: XVector) -> "XJet":
        """``t -> x + t w`` at ``t = 0``."""
        return cls(Jet(x.lambda1, w.lambda1), Jet(x.lambda2, w.lambda2), Jet(x.a, w.a),
                   Jet(x.y.coef, w.y.coef), Jet(x.z.coef, w.z.coef))

    @classmethod
    def segment(cls, x0: XVector, x1: XVector, s) -> "XJet":
        """``s -> x0 + s (x1 - x0)``; ``s`` is a float or ``"all"`` for [0, 1]."""
        if isinstance(s, str):
            sb = Ball(0.5, 0.5)
            d = x1 - x0

            def comp(a0, dd):
                return Jet(a0 + sb * dd, dd)
            return cls(comp(x0.lambda1, d.lambda1), comp(x0.lambda2, d.lambda2), comp(x0.a, d.a),
                       comp(x0.y.padded(d.y.N).coef, d.y.coef), comp(x0.z.padded(d.z.M, d.z.N).coef, d.z.coef))
        if s == 0:
            return cls.point(x0)
        if s == 1:
            return cls.point(x1)
        return cls.point(x0 + (x1 - x0).scale(float(s)))


def anchor_jets(anchors: ProblemAnchors, s):
    """Jets of (anchor point, covector, constant) at ``s`` (float or ``"all"``)."""
    xh = XJet.segment(anchors.xhat0, anchors.xhat1, s)
    q = XJet.segment(anchors.q0, anchors.q1, s)
    c0, c1 = Ball(anchors.c0), Ball(anchors.c1)
    if isinstance(s, str):
        c = Jet(c0 + Ball(0.5, 0.5) * (c1 - c0), c1 - c0)
    elif s == 0:
        c = Jet(c0)
    elif s == 1:
        c = Jet(c1)
    else:
        c = Jet(c0 + Ball(float(s)) * (c1 - c0))
    return xh, q, c


# residual ----------------------------------------------------------------------

@dataclass
class Residual:
    """Structured residual jets."""

    E: Jet
    G1: Jet
    G2: Jet
    G3: Jet
    G4: Jet
    F1: Jet
    F2: Jet

    def flat(self, layout: Layout, which: str = "v") -> Ball:
        """Stack one jet component into a residual vector over ``layout``."""
        def get(j: Jet, shape):
            a = getattr(j, which)
            if a is None:
                return Ball.zeros(shape)
            return pad_center(a, shape) if a.ndim else a
        ny = layout.ny
        f1 = get(self.F1, (ny,))
        f2 = get(self.F2, (2 * layout.M + 1, ny))
        sc = [get(self.E, ()), get(self.G1, ()), get(self.G4, ())]
        mid = np.concatenate([np.array([b.mid for b in sc]), f1.mid, f2.mid.ravel()])
        rad = np.concatenate([np.array([float(b.rad) for b in sc]), f1.rad, f2.rad.ravel()])
        g2, g3 = get(self.G2, ()), get(self.G3, ())
        mid[layout.y0], rad[layout.y0] = g2.mid, float(g2.rad)
        mid[layout.z00], rad[layout.z00] = g3.mid, float(g3.rad)
        return Ball(mid, rad)


def _pair(u: Jet, w: Jet) -> Jet:
    """Bilinear pairing of two jets of arrays (zero-padded)."""
    def op(a, b):
        shape = tuple(max(p, q) for p, q in zip(a.shape, b.shape))
        return (pad_center(a, shape) * pad_center(b, shape)).sum()
    return u.bilinear(w, op)


def residual_jets(x: XJet, xh: XJet, q: XJet, c: Jet) -> Residual:
    y, z = x.y, x.z
    F1 = (x.l2 * y.map(kmul(4))) - y.map(kmul(2)) - y.conv(y).map(kmul(1, 1j))
    yz = y.map(embed).conv(z)
    zz = z.conv(z)
    nl = yz.map(lambda b: b * Ball(2.0)) + x.a * zz
    F2 = (z.map(jmul(1, 1j)) + (x.l1 * x.l2) * z.map(kmul(4)) - x.l1 * z.map(kmul(2))
          - x.l1 * nl.map(kmul(1, 1j)))
    G1 = _pair(xh.z.map(lambda b: b.conj()).map(jmul(2)), z) - Jet(Ball(1.0))
    G2 = _pair(xh.y.map(kmul(1, 1j)), y)
    G3 = _pair((xh.y.map(embed) + xh.a * xh.z).map(kmul(1, 1j)), z)
    G4 = _pair(xh.z.map(jmul(1, 1j)), z)
    E = (q.l1 * x.l1 + q.l2 * x.l2 + q.a * x.a + _pair(q.y, y) + _pair(q.z, z)) - c
    return Residual(E, G1, G2, G3, G4, F1, F2)


def eval_F1(lambda2, y: Seq1D) -> Seq1D:
    r = residual_jets(XJet(Jet(Ball(0.0)), Jet(Ball.coerce(lambda2).reshape(())), Jet(Ball(0.0)),
                           Jet(y.coef), Jet(Ball.zeros((1, 1)))),
                      *_dummy_anchor_jets(y.N))
    return Seq1D(r.F1.v, y.nu2)


def _dummy_anchor_jets(N):
    zero = XJet(Jet(Ball(0.0)), Jet(Ball(0.0)), Jet(Ball(0.0)), Jet(Ball.zeros(1)), Jet(Ball.zeros((1, 1))))
    return zero, zero, Jet(Ball(0.0))


def eval_F2(x: XVector) -> Seq2D:
    r = residual_jets(XJet.point(x), *_dummy_anchor_jets(x.y.N))
    return Seq2D(r.F2.v, x.nu1, x.nu2)


def eval_G(x: XVector, anchors: ProblemAnchors, s=0.0):
    """The four scalar conditions as complex intervals."""
    r = residual_jets(XJet.point(x), *anchor_jets(anchors, s))
    return tuple(g.v.to_interval() for g in (r.G1, r.G2, r.G3, r.G4))


def eval_Hs(x: XVector, s, anchors: ProblemAnchors, layout: Layout | None = None) -> Ball:
    """Residual vector of ``H_s`` at ``x`` over ``layout`` (default: 2K modes)."""
    if layout is None:
        layout = Layout(2 * x.z.M, 2 * max(x.K[1], x.y.N), x.nu1, x.nu2)
    return residual_jets(XJet.point(x), *anchor_jets(anchors, s)).flat(layout)


def eval_H(x: XVector, anchors: ProblemAnchors, layout: Layout | None = None) -> Ball:
    return eval_Hs(x, 0.0, anchors, layout)


def residual_vector(x: XVector, anchors: ProblemAnchors, s=0.0, layout=None) -> XVector:
    """Residual as an XVector (slots as in the flat residual layout)."""
    v = eval_Hs(x, s, anchors, layout)
    layout = layout or Layout(2 * x.z.M, 2 * x.K[1], x.nu1, x.nu2)
    return XVector.from_flat(v, layout)


# Jacobian coefficients -------------------------------------------------------------

@dataclass
class Coefficients:
    """Coefficients of the non-constant part of DH.

    The Jacobian is ``L_const + L(c)`` where ``L`` is linear in these fields:

    * ``q``: (scalars, y, z) of the continuation covector (E row),
    * ``g1, g2, g3, g4``: covectors of the scalar conditions,
    * ``lam2``: F1 K^4 diagonal;  ``ycv``: F1 y->y convolution ``-2iK C(ycv)``,
    * ``f1_l2``: F1 lambda2 column,
    * ``l1l2``, ``l1``: F2 K^4 and -K^2 diagonals,
    * ``zz``: F2 z->z convolution ``-iK C(zz)``;  ``zy``: F2 y->z ``-iK C(zy) E``,
    * ``f2_l1``, ``f2_l2``, ``f2_a``: F2 scalar columns.

    Each field is a :class:`Jet`; ``component`` selects value or derivatives.
    """

    q_sc: Jet
    q_y: Jet
    q_z: Jet
    g1: Jet
    g2: Jet
    g3: Jet
    g4: Jet
    lam2: Jet
    ycv: Jet
    f1_l2: Jet
    l1l2: Jet
    l1: Jet
    zz: Jet
    zy: Jet
    f2_l1: Jet
    f2_l2: Jet
    f2_a: Jet

    def component(self, which: str) -> dict:
        return {k: getattr(getattr(self, k), which) for k in self.__dataclass_fields__}


def coefficient_jets(x: XJet, xh: XJet, q: XJet) -> Coefficients:
    y, z = x.y, x.z
    two = Jet(Ball(2.0))
    q_sc = Jet(*[None if all(getattr(t, a) is None for t in (q.l1, q.l2, q.a)) else
                 _stack3([getattr(t, a) for t in (q.l1, q.l2, q.a)]) for a in ("v", "d", "dd")])
    yz = y.map(embed).conv(z)
    zzc = z.conv(z)
    return Coefficients(
        q_sc=q_sc, q_y=q.y, q_z=q.z,
        g1=xh.z.map(lambda b: b.conj()).map(jmul(2)),
        g2=xh.y.map(kmul(1, 1j)),
        g3=(xh.y.map(embed) + xh.a * xh.z).map(kmul(1, 1j)),
        g4=xh.z.map(jmul(1, 1j)),
        lam2=x.l2,
        ycv=y,
        f1_l2=y.map(kmul(4)),
        l1l2=x.l1 * x.l2,
        l1=x.l1,
        zz=two * x.l1 * (y.map(embed) + x.a * z),
        zy=two * x.l1 * z,
        f2_l1=x.l2 * z.map(kmul(4)) - z.map(kmul(2))
        - (two * yz + x.a * zzc).map(kmul(1, 1j)),
        f2_l2=x.l1 * z.map(kmul(4)),
        f2_a=(x.l1 * zzc).map(kmul(1, -1j)),
    )


def _stack3(parts) -> Ball:
    bs = [Ball(0.0) if p is None else p for p in parts]
    return Ball(np.array([complex(b.mid) for b in bs]), np.array([float(b.rad) for b in bs]))


def _place(dst_mid, dst_rad, rows_idx, cols_idx, blk: Ball):
    dst_mid[np.ix_(rows_idx, cols_idx)] += blk.mid
    dst_rad[np.ix_(rows_idx, cols_idx)] += blk.rad


def _col_vector(arr: Ball, layout: Layout, block: int) -> Ball:
    """Place a centered array on the y (block 1) or z (block 2) slots of ``layout``."""
    out = Ball.zeros(layout.dim)
    if block == 1:
        a = pad_center(arr.reshape(-1), (layout.ny,))
    else:
        a = pad_center(arr, (2 * layout.M + 1, layout.ny)).reshape(-1)
    s = layout.slot(block)
    out.mid[s] = a.mid
    out.rad[s] = a.rad
    return out


def assemble(c: dict, rows: Layout, cols: Layout, constant: bool = True) -> Ball:
    """Dense matrix of ``L_const + L(c)`` (or ``L(c)`` alone) on ``rows x cols``.

    ``c`` maps coefficient names to Balls or ``None`` (zero).
    """
    nr, nc = rows.dim, cols.dim
    mid = np.zeros((nr, nc), dtype=complex)
    rad = np.zeros((nr, nc))
    ys_r = np.arange(nr)[rows.ys]
    zs_r = np.arange(nr)[rows.zs]
    ys_c = np.arange(nc)[cols.ys]
    zs_c = np.arange(nc)[cols.zs]
    f1_rows = ys_r[ys_r != rows.y0]
    f2_rows = zs_r[zs_r != rows.z00]

    def put_row(r, vec: Ball):
        mid[r, :] += vec.mid
        rad[r, :] += vec.rad

    # scalar-condition rows
    if c["q_sc"] is not None or c["q_y"] is not None or c["q_z"] is not None:
        v = Ball.zeros(nc)
        if c["q_sc"] is not None:
            v.mid[:3] = c["q_sc"].mid
            v.rad[:3] = c["q_sc"].rad
        if c["q_y"] is not None:
            v = v + _col_vector(c["q_y"], cols, 1)
        if c["q_z"] is not None:
            v = v + _col_vector(c["q_z"], cols, 2)
        put_row(0, v)
    if c["g1"] is not None:
        put_row(1, _col_vector(c["g1"], cols, 2))
    if c["g4"] is not None:
        put_row(2, _col_vector(c["g4"], cols, 2))
    if c["g2"] is not None:
        put_row(rows.y0, _col_vector(c["g2"], cols, 1))
    if c["g3"] is not None:
        put_row(rows.z00, _col_vector(c["g3"], cols, 2))

    kr1 = rows.k[f1_rows].astype(float)
    kr2 = rows.k[f2_rows].astype(float)
    jr2 = rows.j[f2_rows].astype(float)

    # diagonal parts: positions where (j, k) of row equals (j, k) of col
    pos_y = _positions(rows, cols, f1_rows, 1)
    pos_z = _positions(rows, cols, f2_rows, 2)
    dy = Ball.zeros(len(f1_rows))
    if constant:
        dy = dy + Ball(-kr1 ** 2)
    if c["lam2"] is not None:
        dy = dy + Ball(kr1 ** 4) * c["lam2"]
    dz = Ball.zeros(len(f2_rows))
    if constant:
        dz = dz + Ball(1j * jr2)
    if c["l1l2"] is not None:
        dz = dz + Ball(kr2 ** 4) * c["l1l2"]
    if c["l1"] is not None:
        dz = dz - Ball(kr2 ** 2) * c["l1"]
    for rws, pos, d in ((f1_rows, pos_y, dy), (f2_rows, pos_z, dz)):
        ok = pos >= 0
        mid[rws[ok], pos[ok]] += d.mid[ok]
        rad[rws[ok], pos[ok]] += d.rad[ok]

    # scalar columns
    for name, rws, blk, col in (("f1_l2", f1_rows, 1, 1), ("f2_l1", f2_rows, 2, 0),
                                ("f2_l2", f2_rows, 2, 1), ("f2_a", f2_rows, 2, 2)):
        if c[name] is None:
            continue
        v = _col_vector(c[name], rows, blk)
        mid[rws, col] += v.mid[rws]
        rad[rws, col] += v.rad[rws]

    # convolution parts
    if c["ycv"] is not None and len(f1_rows):
        blk = conv_matrix(embed(c["ycv"]), np.zeros_like(kr1), kr1, np.zeros(len(ys_c)), cols.k[ys_c])
        blk = blk * Ball((-2j * kr1)[:, None])
        _place(mid, rad, f1_rows, ys_c, blk)
    if c["zy"] is not None and len(f2_rows):
        blk = conv_matrix(c["zy"], jr2, kr2, np.zeros(len(ys_c)), cols.k[ys_c])
        blk = blk * Ball((-1j * kr2)[:, None])
        _place(mid, rad, f2_rows, ys_c, blk)
    if c["zz"] is not None and len(f2_rows):
        blk = conv_matrix(c["zz"], jr2, kr2, cols.j[zs_c], cols.k[zs_c])
        blk = blk * Ball((-1j * kr2)[:, None])
        _place(mid, rad, f2_rows, zs_c, blk)
    from .ball import up
    return Ball(mid, up(rad, 8))


def _positions(rows: Layout, cols: Layout, ridx: np.ndarray, block: int) -> np.ndarray:
    """Column position of the same mode as each row index (-1 if absent)."""
    j, k = rows.j[ridx], rows.k[ridx]
    ok = (np.abs(j) <= cols.M) & (np.abs(k) <= cols.N)
    if block == 1:
        pos = cols.y0 + k
    else:
        pos = 3 + cols.ny + (j + cols.M) * cols.ny + (k + cols.N)
    return np.where(ok, pos, -1)


def jacobian_DHs_finite(s, anchors: ProblemAnchors, K=None, x: XVector | None = None,
                        cols: Layout | None = None) -> FiniteBlockOperator:
    """Dense truncated Jacobian of ``H_s`` at ``x`` (default: the anchor at ``s``)."""
    K = anchors.K if K is None else K
    x0 = anchors.xhat0
    rows = Layout(K[0], K[1], x0.nu1, x0.nu2)
    cols = cols or rows
    xh, q, _ = anchor_jets(anchors, s)
    xj = XJet.point(x) if x is not None else XJet.segment(anchors.xhat0, anchors.xhat1, s)
    xj = XJet(*(Jet(getattr(xj, f).v) for f in ("l1", "l2", "a", "y", "z")))
    xh = XJet(*(Jet(getattr(xh, f).v) for f in ("l1", "l2", "a", "y", "z")))
    q = XJet(*(Jet(getattr(q, f).v) for f in ("l1", "l2", "a", "y", "z")))
    co = coefficient_jets(xj, xh, q).component("v")
    return FiniteBlockOperator(rows, cols, assemble(co, rows, cols))


def jacobian_at(x: XVector, anchors: ProblemAnchors, s=0.0, rows: Layout | None = None,
                cols: Layout | None = None) -> Ball:
    rows = rows or Layout(x.z.M, x.K[1], x.nu1, x.nu2)
    cols = cols or rows
    xh, q, _ = anchor_jets(anchors, s)
    co = coefficient_jets(XJet.point(x), xh, q).component("v")
    return assemble(co, rows, cols)


@dataclass
class SecondDerivative:
    """``D^2H(x)[w]`` (or ``D^3H(x)[w, w]``) as a coefficient set.

    The entries of ``coef`` give the K^4, K^2 and K multipliers of each block:
    ``lam2``, ``l1l2`` are K^4 diagonals, ``l1`` the K^2 diagonal, ``ycv``,
    ``zz``, ``zy`` the K convolution blocks and ``f*`` the scalar columns.
    """

    coef: dict
    layout_hint: tuple = field(default=(0, 0))

    def matrix(self, rows: Layout, cols: Layout) -> Ball:
        return assemble(self.coef, rows, cols, constant=False)

    def apply(self, c: XVector, rows: Layout | None = None) -> Ball:
        M, N = c.z.M + self.layout_hint[0], c.K[1] + self.layout_hint[1]
        rows = rows or Layout(M, N, c.nu1, c.nu2)
        cols = Layout(c.z.M, c.K[1], c.nu1, c.nu2)
        return matmul(self.matrix(rows, cols), c.to_flat(cols))


def d2h_apply(x: XVector, w: XVector, anchors: ProblemAnchors | None = None) -> SecondDerivative:
    """Coefficients of ``D^2H(x)[w]``; scalar-condition rows vanish (G, E are linear)."""
    anchors = anchors or ProblemAnchors.parameter_in_a(x)
    xh, q, _ = anchor_jets(anchors, 0.0)
    co = coefficient_jets(XJet.line(x, w), xh, q).component("d")
    for k in ("q_sc", "q_y", "q_z", "g1", "g2", "g3", "g4"):
        co[k] = None
    return SecondDerivative(co, (max(x.z.M, w.z.M), max(x.K[1], w.K[1])))


def d3h_apply(x_s: XVector, x_delta: XVector, anchors: ProblemAnchors | None = None) -> SecondDerivative:
    """Coefficients of ``D^3H(x_s)[x_delta, x_delta]``; only F2 rows survive."""
    anchors = anchors or ProblemAnchors.parameter_in_a(x_s)
    xh, q, _ = anchor_jets(anchors, 0.0)
    co = coefficient_jets(XJet.line(x_s, x_delta), xh, q).component("dd")
    for k in ("q_sc", "q_y", "q_z", "g1", "g2", "g3", "g4"):
        co[k] = None
    return SecondDerivative(co, (2 * x_delta.z.M, 2 * x_delta.K[1]))


def segment_coefficients(anchors: ProblemAnchors) -> Coefficients:
    """Coefficient jets along the whole segment (value is an s-hull)."""
    xj = XJet.segment(anchors.xhat0, anchors.xhat1, "all")
    xh, q, _ = anchor_jets(anchors, "all")
    return coefficient_jets(xj, xh, q)


def segment_residual(anchors: ProblemAnchors) -> Residual:
    xj = XJet.segment(anchors.xhat0, anchors.xhat1, "all")
    return residual_jets(xj, *anchor_jets(anchors, "all"))


# tails and the operators A, A-dagger ------------------------------------------------

def tail_polys(x: XVector):
    """``P1 = lambda2 K^4 - K^2`` and ``P2 = iJ + lambda1 lambda2 K^4 - lambda1 K^2``."""
    l1, l2 = x.lambda1, x.lambda2
    P1 = PolySymbol({4: l2, 2: -1.0})
    P2 = PolySymbol({4: l1 * l2, 2: -l1}, e=1)
    return P1, P2


def check_tails(x: XVector, K, n_scan=None) -> None:
    P1, P2 = tail_polys(x)
    one = PolySymbol.const(1.0)
    if not verify_denominator_nonvanishing(RationalDiagonalSymbol(one, P1, K, "1d"), n_scan):
        raise TailMayVanish("P1 may vanish beyond the truncation")
    if not verify_denominator_nonvanishing(RationalDiagonalSymbol(one, P2, K, "2d"), n_scan):
        raise TailMayVanish("P2 may vanish beyond the truncation")


def build_A_dagger(s, anchors: ProblemAnchors, K=None, n_scan=None) -> EventuallyDiagonalOperator:
    """Truncated Jacobian plus the diagonal tail (P1, P2) at an endpoint ``s``."""
    K = anchors.K if K is None else K
    x = anchors.xhat1 if s == 1 else anchors.xhat0
    if s not in (0, 1):
        x = anchors.xhat0 + anchors.x_delta().scale(float(s))
    check_tails(x, K, n_scan)
    fin = jacobian_DHs_finite(s, anchors, K)
    P1, P2 = tail_polys(x)
    one = PolySymbol.const(1.0)
    return EventuallyDiagonalOperator(fin, DiagonalTail(K, [TailTerm(P1, one)], [TailTerm(P2, one)]))


def symmetrized_inverse(Dmid: np.ndarray, layout: Layout) -> np.ndarray:
    """``(At + At*)/2`` for a floating-point inverse ``At``; exactly symmetric."""
    At = np.linalg.inv(Dmid)
    conj = np.conj(At[np.ix_(layout.reflect, layout.reflect)])
    return 0.5 * (At + conj)


def build_A(s, anchors: ProblemAnchors, K=None, numeric_inverse: np.ndarray | None = None,
            A_dagger: EventuallyDiagonalOperator | None = None, n_scan=None):
    """Approximate inverse: symmetrized numeric inverse plus tail 1/P1, 1/P2.

    Returns ``(A, condition_estimate)``.
    """
    Ad = A_dagger or build_A_dagger(s, anchors, K, n_scan)
    layout = Ad.finite.rows
    Dm = Ad.finite.mat.mid
    if numeric_inverse is None:
        numeric_inverse = symmetrized_inverse(Dm, layout)
    cond = float(abs(np.linalg.cond(Dm, 1))) if layout.dim <= 4000 else float("nan")
    one = PolySymbol.const(1.0)
    P1 = Ad.tail.y_terms[0].num
    P2 = Ad.tail.z_terms[0].num
    fin = FiniteBlockOperator(layout, layout, Ball(numeric_inverse))
    return EventuallyDiagonalOperator(fin, DiagonalTail(layout.K, [TailTerm(one, P1)], [TailTerm(one, P2)])), cond


def preserves_symmetry(A: EventuallyDiagonalOperator, x: XVector, tol: float = 1e-12) -> bool:
    from .operators import ed_apply
    return is_symmetric(ed_apply(A, x), tol) and is_symmetric(conjugate(x), tol)
