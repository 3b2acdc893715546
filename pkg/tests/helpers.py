"""Random problem instances and finite-difference checks shared by tests."""

import numpy as np

from kshopf import ks
from kshopf.ball import Ball
from kshopf.operators import DiagonalTail, EventuallyDiagonalOperator, FiniteBlockOperator, TailTerm
from kshopf.sequences import Layout, Seq1D, Seq2D, XVector, symmetrize


def random_x(rng, M=3, N=4, scale=0.3, nu1=1.05, nu2=1.05) -> XVector:
    y = Seq1D(scale * (rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)), nu2)
    s = (2 * M + 1, 2 * N + 1)
    z = Seq2D(scale * (rng.standard_normal(s) + 1j * rng.standard_normal(s)), nu1, nu2)
    return symmetrize(XVector(rng.random() + 0.2, rng.random() + 0.2, 0.1 * rng.standard_normal(), y, z))


def random_anchors(rng, M=3, N=4, mode="pseudo_arclength") -> ks.ProblemAnchors:
    return ks.ProblemAnchors.single(random_x(rng, M, N), random_x(rng, M, N), 0.3, mode)


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def fd_derivative_errors(rng, M=2, N=3, h=1e-5):
    """Relative errors of DH, D2H and D3H against central differences.

    DH is compared column by column with differences of ``eval_Hs``; D2H[w, c]
    with differences of ``DH c`` along w; D3H[w, w, c] with differences of
    ``D2H[w, c]`` along w.
    """
    x = random_x(rng, M, N)
    an = random_anchors(rng, M, N)
    cols = Layout(M, N)
    big = Layout(3 * M, 3 * N)
    J = ks.jacobian_at(x, an, rows=big, cols=cols).mid
    fd = np.empty_like(J)
    for c in range(cols.dim):
        e = np.zeros(cols.dim, complex)
        e[c] = 1
        w = XVector.from_flat(Ball(e), cols)
        fd[:, c] = (ks.eval_Hs(x + w.scale(h), 0.0, an, big).mid
                    - ks.eval_Hs(x - w.scale(h), 0.0, an, big).mid) / (2 * h)
    e1 = _rel(fd, J)

    w, c = random_x(rng, M, N), random_x(rng, M, N)
    cv = c.to_flat(cols).mid
    d2 = ks.d2h_apply(x, w, an).apply(c, big).mid
    Jp = ks.jacobian_at(x + w.scale(h), an, rows=big, cols=cols).mid
    Jm = ks.jacobian_at(x - w.scale(h), an, rows=big, cols=cols).mid
    e2 = _rel((Jp - Jm) @ cv / (2 * h), d2)

    d3 = ks.d3h_apply(x, w, an).apply(c, big).mid
    Dp = ks.d2h_apply(x + w.scale(h), w, an).apply(c, big).mid
    Dm = ks.d2h_apply(x - w.scale(h), w, an).apply(c, big).mid
    e3 = _rel((Dp - Dm) / (2 * h), d3)
    return e1, e2, e3


def _mix_terms(t0, t1, s):
    return ([TailTerm(t.num, t.den, (1 - s) * Ball.coerce(t.coef)) for t in t0]
            + [TailTerm(t.num, t.den, s * Ball.coerce(t.coef)) for t in t1])


def affine_op(B0: EventuallyDiagonalOperator, B1: EventuallyDiagonalOperator, s: float):
    """``(1 - s) B0 + s B1`` with both tails kept as separate terms."""
    f0, f1 = B0.finite, B1.finite
    fin = FiniteBlockOperator(f0.rows, f0.cols, f0.mat * (1 - s) + f1.mat * s)
    tail = DiagonalTail(B0.K, _mix_terms(B0.tail.y_terms, B1.tail.y_terms, s),
                        _mix_terms(B0.tail.z_terms, B1.tail.z_terms, s))
    return EventuallyDiagonalOperator(fin, tail)


def x_at(seg, s):
    return seg.e0.x + (seg.e1.x - seg.e0.x).scale(s)
