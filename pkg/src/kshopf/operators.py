"""Linear operators on X in 3x3 block form.

Block index 1 is the scalar part C^3, 2 the y part (l1_{nu2}) and 3 the z
part (l1_{nu1,nu2}).  Rows of a matrix are outputs, columns are inputs.  The
induced block norms are

* 1<-1 : max row sum (max norm on C^3),
* 1<-j : max over rows of ``sup_c w_c^{-1} |B_rc|``,
* i<-1 : ``sum_c sum_r w_r |B_rc|`` (an upper bound),
* i<-j : ``sup_c w_c^{-1} sum_r w_r |B_rc|`` (attained at a basis vector),

and the operator norm on X is bounded by the max over output blocks of the
row sums of the 3x3 block-norm matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ball import Ball, matmul, matmul_up, sum_up, up
from .sequences import Layout, Seq1D, XVector, norm1d, norm2d
from .tail_bounds import PolySymbol, RationalDiagonalSymbol, tail_norm_bound


class UnsupportedBlock(ValueError):
    """Requested a block norm that is not provided."""


# norms -------------------------------------------------------------------

def component_norms_abs(W: np.ndarray, rows: Layout, cols: Layout) -> np.ndarray:
    """3x3 block norms of a nonnegative entrywise bound ``W`` (rows x cols).

    The y<-z block uses the same weighted column-sum formula as the other
    l1<-l1 blocks.
    """
    W = np.asarray(W, dtype=float)
    out = np.zeros((3, 3))
    ws = [None, rows.weights_up[rows.ys], rows.weights_up[rows.zs]]
    colsum = [None,
              matmul_up(ws[1][None, :], W[rows.ys, :])[0],
              matmul_up(ws[2][None, :], W[rows.zs, :])[0]]
    winv = cols.inv_weights_up
    for i in range(3):
        for jb in range(3):
            cs = cols.slot(jb)
            if i == 0 and jb == 0:
                out[0, 0] = float(np.max(sum_up(W[rows.sc, cs], axis=1))) if W.size else 0.0
            elif i == 0:
                blk = W[rows.sc, cs] * winv[cs]
                out[0, jb] = float(np.max(up(blk, 2))) if blk.size else 0.0
            elif jb == 0:
                out[i, 0] = float(sum_up(colsum[i][cs]))
            else:
                v = up(colsum[i][cs] * winv[cs], 2)
                out[i, jb] = float(np.max(v)) if v.size else 0.0
    return out


def component_norms(B: Ball, rows: Layout, cols: Layout) -> np.ndarray:
    return component_norms_abs(Ball.coerce(B).absup(), rows, cols)


def op_norm_bound(C) -> float:
    """Bound on the operator norm of X from a 3x3 block-norm matrix."""
    C = np.asarray(C, dtype=float)
    return float(np.max(sum_up(C, axis=1)))


def conv_operator_norm(u) -> float:
    """Norm of the convolution operator ``C(u)``, i.e. the norm of ``u``."""
    return norm1d(u).hi if isinstance(u, Seq1D) else norm2d(u).hi


# finite operators ---------------------------------------------------------

@dataclass
class FiniteBlockOperator:
    """Dense operator from ``cols`` modes to ``rows`` modes."""

    rows: Layout
    cols: Layout
    mat: Ball

    def __post_init__(self):
        self.mat = Ball.coerce(self.mat)
        if self.mat.shape != (self.rows.dim, self.cols.dim):
            raise ValueError("matrix shape does not match layouts")

    def apply(self, x: XVector) -> XVector:
        """``Pi_rows (B Pi_cols x)``; modes of x outside ``cols`` are ignored."""
        from .sequences import project
        xv = project(x, self.cols.K).padded(max(self.cols.M, x.z.M), max(self.cols.N, x.K[1]))
        v = xv.to_flat(Layout(xv.z.M, xv.z.N, self.cols.nu1, self.cols.nu2))
        v = v[self.cols.index_in(Layout(xv.z.M, xv.z.N, self.cols.nu1, self.cols.nu2))]
        return XVector.from_flat(matmul(self.mat, v), self.rows)

    def __matmul__(self, other: "FiniteBlockOperator") -> "FiniteBlockOperator":
        if other.rows != self.cols:
            raise ValueError("inner layouts differ")
        return FiniteBlockOperator(self.rows, other.cols, matmul(self.mat, other.mat))

    def component_norms(self) -> np.ndarray:
        return component_norms(self.mat, self.rows, self.cols)

    def conjugate(self) -> "FiniteBlockOperator":
        return FiniteBlockOperator(self.rows, self.cols, self.rows.conjugate_matrix(self.mat, self.cols))


def block_norm(B: FiniteBlockOperator, i: int, j: int) -> float:
    """Induced norm of block ``(i, j)`` (1-based) of a finite operator."""
    if (i, j) == (2, 3):
        raise UnsupportedBlock("the y<-z block norm is not provided")
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise UnsupportedBlock(f"no block ({i}, {j})")
    return float(B.component_norms()[i - 1, j - 1])


def identity_operator(layout: Layout) -> FiniteBlockOperator:
    return FiniteBlockOperator(layout, layout, Ball(np.eye(layout.dim, dtype=complex)))


# banded operators ---------------------------------------------------------

def conv_matrix(u: Ball, rj, rk, cj, ck) -> Ball:
    """Matrix ``u_{rj - cj, rk - ck}`` for centered 2-d ``u``; zero off-support."""
    u = Ball.coerce(u)
    Mu, Nu = u.shape[0] // 2, u.shape[1] // 2
    dj = np.subtract.outer(np.asarray(rj, dtype=np.int32), np.asarray(cj, dtype=np.int32))
    dk = np.subtract.outer(np.asarray(rk, dtype=np.int32), np.asarray(ck, dtype=np.int32))
    ok = (np.abs(dj) <= Mu) & (np.abs(dk) <= Nu)
    flat = np.where(ok, (dj + Mu) * (2 * Nu + 1) + (dk + Nu), 0)
    del dj, dk
    mid = np.where(ok, u.mid.ravel()[flat], 0)
    rad = np.where(ok, np.broadcast_to(u.rad, u.shape).ravel()[flat], 0.0)
    return Ball(mid, rad)


@dataclass
class ConvolutionOperator:
    """``C(u)`` acting on the y block (1-d ``u``) or the z block (2-d ``u``)."""

    u: object

    @property
    def block(self) -> int:
        return 2 if isinstance(self.u, Seq1D) else 3

    @property
    def bandwidth(self) -> tuple[int, int]:
        if isinstance(self.u, Seq1D):
            return (0, self.u.N)
        return (self.u.M, self.u.N)

    def matrix(self, rows: Layout, cols: Layout) -> Ball:
        out = Ball.zeros((rows.dim, cols.dim))
        b = self.block - 1
        rs, cs = rows.slot(b), cols.slot(b)
        coef = self.u.coef.reshape(1, -1) if isinstance(self.u, Seq1D) else self.u.coef
        blk = conv_matrix(coef, rows.j[rs], rows.k[rs], cols.j[cs], cols.k[cs])
        out.mid[rs, cs] = blk.mid
        out.rad = np.array(out.rad)
        out.rad[rs, cs] = blk.rad
        return out


@dataclass
class IdentityBanded:
    bandwidth: tuple = (0, 0)

    def matrix(self, rows: Layout, cols: Layout) -> Ball:
        out = np.zeros((rows.dim, cols.dim), dtype=complex)
        idx = rows.index_in(cols) if cols.M >= rows.M and cols.N >= rows.N else None
        if idx is None:
            raise ValueError("identity needs cols >= rows")
        out[np.arange(rows.dim), idx] = 1.0
        return Ball(out)


def compose_finite_banded(A: FiniteBlockOperator, B) -> FiniteBlockOperator:
    """Dense representation of ``A B`` for a banded ``B``.

    ``A`` reads only modes in its column layout ``K2``; ``B`` moves modes by at
    most its bandwidth, so the product reads modes in ``K2 + bandwidth``.
    """
    bm, bn = B.bandwidth
    wide = Layout(A.cols.M + bm, A.cols.N + bn, A.cols.nu1, A.cols.nu2)
    return FiniteBlockOperator(A.rows, wide, matmul(A.mat, B.matrix(A.cols, wide)))


# eventually diagonal operators --------------------------------------------

@dataclass
class TailTerm:
    """``coef * num / den`` with polynomial symbols."""

    num: PolySymbol
    den: PolySymbol
    coef: object = 1.0

    def values(self, j, k) -> Ball:
        v = self.num.value(j, k) * self.den.value(j, k).inv()
        return v * Ball.coerce(self.coef)


@dataclass
class DiagonalTail:
    """Diagonal action beyond the truncation ``K`` on the y and z blocks."""

    K: tuple
    y_terms: list = field(default_factory=list)
    z_terms: list = field(default_factory=list)

    def entries(self, block: int, j, k) -> Ball:
        terms = self.y_terms if block == 2 else self.z_terms
        out = Ball.zeros(np.shape(k))
        for t in terms:
            out = out + t.values(np.asarray(j), np.asarray(k))
        return out

    def symbols(self, block: int):
        terms = self.y_terms if block == 2 else self.z_terms
        space = "1d" if block == 2 else "2d"
        return [(RationalDiagonalSymbol(t.num, t.den, self.K, space), t.coef) for t in terms]

    def norm(self, block: int, kpow: int = 0, n_scan: int | None = None) -> float:
        """Bound on ``sup |entry * k^kpow|`` over the tail (triangle over terms)."""
        total = 0.0
        for sym, c in self.symbols(block):
            num = _times_kpow(sym.num, kpow)
            s = RationalDiagonalSymbol(num, sym.den, sym.K, sym.space)
            total += tail_norm_bound(s, n_scan) * float(Ball.coerce(c).absup())
        return float(up(total, 4))


def _times_kpow(p: PolySymbol, kpow: int) -> PolySymbol:
    if kpow == 0:
        return p
    out = {}
    for q, c in p.coef.items():
        if q + kpow not in (0, 1, 2, 4):
            raise ValueError(f"K^{q + kpow} not supported")
        out[q + kpow] = c
    return PolySymbol(out, p.e)


@dataclass
class EventuallyDiagonalOperator:
    """Finite center block plus a diagonal tail on the modes beyond it."""

    finite: FiniteBlockOperator
    tail: DiagonalTail

    @property
    def K(self) -> tuple:
        return self.finite.rows.K

    def tail_values(self, layout: Layout) -> Ball:
        """Tail entries at the indices of ``layout`` outside ``K`` (0 inside)."""
        out = Ball.zeros(layout.dim)
        inside = layout.inside_mask(self.finite.rows)
        for b in (2, 3):
            s = layout.slot(b - 1)
            idx = np.arange(layout.dim)[s]
            sel = idx[~inside[s]]
            if sel.size:
                v = self.tail.entries(b, layout.j[sel], layout.k[sel])
                out.mid[sel] = v.mid
                out.rad = np.array(out.rad)
                out.rad[sel] = v.rad
        return out


def ed_apply(A: EventuallyDiagonalOperator, x: XVector) -> XVector:
    """Apply an eventually diagonal operator to a finitely supported vector."""
    M = max(A.K[0], x.z.M)
    N = max(A.K[1], x.K[1])
    big = Layout(M, N, x.nu1, x.nu2)
    v = x.padded(M, N).to_flat(big)
    idx = A.finite.rows.index_in(big)
    out = v * A.tail_values(big)
    fin = matmul(A.finite.mat, v[A.finite.cols.index_in(big)])
    out.mid[idx] = fin.mid
    out.rad = np.array(out.rad)
    out.rad[idx] = fin.rad
    return XVector.from_flat(out, big)
