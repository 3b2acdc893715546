import numpy as np
import pytest

from kshopf.ball import Ball
from kshopf.operators import (
    ConvolutionOperator,
    DiagonalTail,
    EventuallyDiagonalOperator,
    FiniteBlockOperator,
    TailTerm,
    UnsupportedBlock,
    block_norm,
    component_norms,
    compose_finite_banded,
    ed_apply,
    identity_operator,
    op_norm_bound,
)
from kshopf.sequences import Layout, Seq1D, Seq2D, XVector, conv1d, x_norm
from kshopf.tail_bounds import PolySymbol

from oracles import brute_block, x_norm_flat


@pytest.mark.parametrize("seed", range(5))
def test_block_norms_equal_brute_force(seed):
    rng = np.random.default_rng(seed)
    M, N = [(0, 11), (1, 3), (0, 5), (1, 2), (0, 8)][seed]
    L = Layout(M, N, 1.0 + rng.random() * 0.2, 1.0 + rng.random() * 0.2)
    B = rng.random((L.dim, L.dim))
    C = component_norms(Ball(B), L, L)
    for i in range(3):
        for j in range(3):
            ref = brute_block(B, L, i, j)
            assert abs(C[i, j] - ref) <= 1e-10 * max(ref, 1e-300)


def test_op_norm_dominates_samples():
    rng = np.random.default_rng(7)
    L = Layout(1, 3, 1.1, 1.05)
    B = rng.normal(size=(L.dim, L.dim)) + 1j * rng.normal(size=(L.dim, L.dim))
    bound = op_norm_bound(component_norms(Ball(B), L, L))
    for _ in range(200):
        x = rng.normal(size=L.dim) + 1j * rng.normal(size=L.dim)
        x *= rng.random(L.dim) ** 4
        assert x_norm_flat(B @ x, L) <= bound * x_norm_flat(x, L) * (1 + 1e-12)


def test_identity_and_unsupported_block():
    L = Layout(1, 2)
    I = identity_operator(L)
    assert np.allclose(I.component_norms(), np.eye(3))
    assert block_norm(I, 3, 3) == pytest.approx(1.0)
    with pytest.raises(UnsupportedBlock):
        block_norm(I, 2, 3)
    with pytest.raises(UnsupportedBlock):
        block_norm(I, 4, 1)


def test_convolution_operator_matches_conv():
    rng = np.random.default_rng(8)
    u = Seq1D(rng.normal(size=5) + 0j)
    L = Layout(0, 6)
    B = ConvolutionOperator(u).matrix(L, L)
    v = Seq1D(np.concatenate([np.zeros(2), rng.normal(size=9), np.zeros(2)]) + 0j)
    x = XVector(0, 0, 0, v, Seq2D(np.zeros((1, 13))))
    out = XVector.from_flat(B @ x.to_flat(L), L)
    ref = conv1d(u, v)
    for k in range(-6, 7):
        assert abs(out.y[k] - ref[k]) < 1e-12


def test_composition_reads_wider_columns():
    rng = np.random.default_rng(9)
    L = Layout(1, 2)
    A = FiniteBlockOperator(L, L, Ball(rng.normal(size=(L.dim, L.dim)) + 0j))
    z = Seq2D(rng.normal(size=(3, 3)) + 0j)
    AB = compose_finite_banded(A, ConvolutionOperator(z))
    assert AB.cols.K == (2, 3)


def test_eventually_diagonal_apply_uses_tail():
    L = Layout(0, 2)
    fin = identity_operator(L)
    P = PolySymbol({2: 1.0})
    tail = DiagonalTail((0, 2), [TailTerm(PolySymbol.const(1.0), P)], [TailTerm(PolySymbol.const(1.0), PolySymbol({2: 1.0}, e=1))])
    A = EventuallyDiagonalOperator(fin, tail)
    y = Seq1D.delta(4, nu2=1.05)
    x = XVector(1.0, 2.0, 3.0, y, Seq2D(np.zeros((1, 1))))
    out = ed_apply(A, x)
    assert abs(out.y[4] - 1 / 16) < 1e-15
    assert complex(out.a.mid) == 3.0
    assert x_norm(out) <= x_norm(x) * (1 + 1e-12)
