import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from kshopf import continuation as C
from kshopf import ks
from kshopf import validator as V
from kshopf.ball import Ball
from kshopf.operators import (
    DiagonalTail,
    EventuallyDiagonalOperator,
    TailTerm,
    component_norms,
    ed_apply,
    op_norm_bound,
)
from kshopf.sequences import Layout, XVector, x_norm
from kshopf.tail_bounds import PolySymbol

from helpers import affine_op, x_at

K = (4, 8)


@pytest.fixture(scope="module")
def run():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        seed = C.initial_hopf_guess((0.10, 0.245), K)
        return C.step_branch(seed, C.StepConfig(K=K))


@pytest.fixture(scope="module")
def seg(run):
    return V.prepare_segment(run.segments[2].anchors())


@pytest.fixture(scope="module")
def bounds(seg):
    return {"Y": V.y_bound_segment(seg), "Z0": V.z0_bound_segment(seg),
            "Z1": V.z1_bound_segment(seg), "Z2": V.z2_bound_segment(seg, 1e-4)}


def _rand_x(rng, L: Layout, decay=0.7):
    w = decay ** (np.abs(L.j) + np.abs(L.k))
    v = w * (rng.standard_normal(L.dim) + 1j * rng.standard_normal(L.dim))
    x = XVector.from_flat(Ball(v), L)
    return x.scale(1.0 / x_norm(x))


def _unit(L: Layout, idx: int):
    v = np.zeros(L.dim, complex)
    v[idx] = 1.0
    x = XVector.from_flat(Ball(v), L)
    return x.scale(1.0 / x_norm(x))


# radii polynomial

def test_radii_textbook_example():
    c = V.solve_radii(0.01, 0.3, 0.2, 1.0, 1.0)
    assert c.validated
    lo, hi = c.negativity_interval
    assert lo < c.r_star < hi and c.r_star <= 1.0
    # the negativity interval contains 0.05 as well
    assert V.radii_poly(0.01, 0.3, 0.2, 1.0, 0.05).hi < 0
    # exact lower root of r^2 - r/2 + 1/100 lies below r*
    assert Fraction(c.r_star) ** 2 - Fraction(c.r_star) / 2 + Fraction(1, 100) < 0


def test_radii_no_negative_region():
    c = V.solve_radii(1.0, 0.99, 0.0, 1.0, 1.0)
    assert not c.validated and c.r_star is None
    assert any("negative" in f or "Z0 + Z1" in f for f in c.stage_failures)


def test_radii_contraction_failure():
    c = V.solve_radii(1e-6, 0.6, 0.5, 1.0, 1.0)
    assert not c.validated and "Z0 + Z1 >= 1" in c.stage_failures[0]


def test_radii_exceeding_R_fails():
    c = V.solve_radii(0.01, 0.3, 0.2, 1.0, 1e-3)
    assert not c.validated and c.r_star > 1e-3
    assert "exceeds R" in c.stage_failures[-1]


def test_radii_linear_case():
    c = V.solve_radii(1e-3, 0.5, 0.0, 0.0, 1.0)
    assert c.validated and math.isinf(c.negativity_interval[1])


def test_radii_rejects_nonfinite():
    c = V.solve_radii(math.inf, 0.1, 0.1, 1.0, 1.0)
    assert not c.validated


# injectivity

def test_injectivity_on_branch(seg, bounds):
    assert V.check_injectivity(seg.e0.A, seg.e1.A, seg.e0.Ad, seg.e1.Ad)
    assert V.check_injectivity(seg.e0.A, seg.e1.A, z0=bounds["Z0"])


def test_injectivity_z0_threshold(seg):
    assert V.check_injectivity(seg.e0.A, seg.e1.A, z0=0.999)
    assert not V.check_injectivity(seg.e0.A, seg.e1.A, z0=1.001)


def test_injectivity_tail_sign_change(seg):
    A0 = seg.e0.A
    P = A0.tail.y_terms[0].den
    flipped = PolySymbol({p: -c for p, c in P.coef.items()}, P.e)
    tail = DiagonalTail(A0.K, [TailTerm(PolySymbol.const(1.0), flipped)], A0.tail.z_terms)
    A1 = EventuallyDiagonalOperator(A0.finite, tail)
    assert not V.check_injectivity(A0, A1, z0=0.1)


def test_injectivity_needs_z0_or_adjoints(seg):
    with pytest.raises(ValueError):
        V.check_injectivity(seg.e0.A, seg.e1.A)


# degeneration of the segment bounds

def test_segment_bounds_degenerate_to_single(run):
    x = run.segments[1].xhat0
    an = run.segments[1].anchors()
    twin = XVector(x.lambda1, x.lambda2, x.a, x.y, x.z)
    deg = ks.ProblemAnchors(x, twin, an.q0, an.q0, an.c0, an.c0, an.mode)
    sd = V.prepare_segment(deg)
    assert not sd.degenerate
    single = V.prepare_segment(ks.ProblemAnchors.single(x, an.q0, an.c0, an.mode))
    assert single.degenerate
    pairs = [
        (V.y_bound_segment(sd), V.y_bound_single(single)),
        (V.z0_bound_segment(sd), V.z0_bound_single(single.e0.A, single.e0.Ad)),
        (V.z1_bound_segment(sd), V.z1_bound_single(single)),
        (V.z2_bound_segment(sd, 1e-4), V.z2_bound_single(single, 1e-4)),
    ]
    for a, b in pairs:
        assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


# sampling oracles: each bound dominates its defining quantity

S_GRID = np.linspace(0, 1, 11)


def test_y_dominates_sampled_defect(seg, bounds):
    an = seg.anchors
    W = seg.W
    for s in S_GRID:
        A = affine_op(seg.e0.A, seg.e1.A, s)
        r = ks.residual_vector(x_at(seg, s), an, s, W)
        assert x_norm(ed_apply(A, r)) <= bounds["Y"]


def test_z0_dominates_sampled_defect(seg, bounds):
    L = seg.L
    n = L.dim
    big = Layout(3 * K[0], 3 * K[1], L.nu1, L.nu2)
    out = ~big.inside_mask(L)
    for s in S_GRID:
        A = affine_op(seg.e0.A, seg.e1.A, s)
        Ad = affine_op(seg.e0.Ad, seg.e1.Ad, s)
        E = Ball(np.eye(n, dtype=complex)) - Ball(A.finite.mat.mid @ Ad.finite.mat.mid)
        fin = op_norm_bound(component_norms(E, L, L))
        t = (1 - (A.tail_values(big) * Ad.tail_values(big)).mid[out])
        tail = float(np.max(np.abs(t[big.block[out] > 0])))
        assert max(fin, tail) <= bounds["Z0"] * (1 + 1e-9) + 1e-14


def _pad_flat(x: XVector, L: Layout) -> np.ndarray:
    return x.padded(L.M, L.N).to_flat(L).mid


def test_z1_dominates_sampled_defect(seg, bounds):
    rng = np.random.default_rng(0)
    an = seg.anchors
    L = seg.L
    cols = Layout(2 * K[0], 2 * K[1], L.nu1, L.nu2)
    rows = Layout(3 * K[0], 3 * K[1], L.nu1, L.nu2)
    cs = [_rand_x(rng, cols) for _ in range(4)]
    cs += [_unit(cols, int(i)) for i in rng.choice(np.flatnonzero(~cols.inside_mask(L)), 4)]
    for s in (0.0, 0.3, 0.5, 1.0):
        xs = x_at(seg, s)
        A = affine_op(seg.e0.A, seg.e1.A, s)
        Ad = affine_op(seg.e0.Ad, seg.e1.Ad, s)
        J = ks.jacobian_at(xs, an, s, rows, cols).mid
        for c in cs:
            d = _pad_flat(ed_apply(Ad, c), rows) - J @ c.to_flat(cols).mid
            v = ed_apply(A, XVector.from_flat(Ball(d), rows))
            assert x_norm(v) <= bounds["Z1"] * x_norm(c) * (1 + 1e-9)


def test_z2_dominates_sampled_defect(seg, bounds):
    rng = np.random.default_rng(1)
    an = seg.anchors
    L = seg.L
    R = 1e-4
    cols = Layout(2 * K[0], 2 * K[1], L.nu1, L.nu2)
    rows = Layout(3 * K[0], 3 * K[1], L.nu1, L.nu2)
    for s in (0.0, 0.5, 1.0):
        xs = x_at(seg, s)
        A = affine_op(seg.e0.A, seg.e1.A, s)
        J0 = ks.jacobian_at(xs, an, s, rows, cols).mid
        for _ in range(3):
            b = _rand_x(rng, L).scale(R)
            J1 = ks.jacobian_at(xs + b, an, s, rows, cols).mid
            c = _rand_x(rng, cols)
            v = ed_apply(A, XVector.from_flat(Ball((J1 - J0) @ c.to_flat(cols).mid), rows))
            assert x_norm(v) <= bounds["Z2"] * x_norm(b) * x_norm(c) * (1 + 1e-6)


# driver

def test_validate_segment_reports(run):
    an = run.segments[0].anchors()
    cert = V.validate_segment(an, V.ValidationConfig(R=1e-4), echo={"tag": 1})
    assert cert.mode == "segment" and cert.config_echo == {"tag": 1}
    assert all(math.isfinite(getattr(cert, k)) for k in ("Y", "Z0", "Z1", "Z2"))
    assert cert.hopf_crossing is False
    assert '"Z2"' in cert.dumps()
    if not cert.validated:
        assert cert.stage_failures


def test_amplitude_crossing_guards(run):
    seg = run.segments[2]
    assert V.amplitude_crosses_zero(seg.xhat0, seg.xhat1)
    assert not V.amplitude_crosses_zero(seg.xhat0, seg.xhat0)
    other = run.segments[0]
    assert not V.amplitude_crosses_zero(other.xhat0, other.xhat1)


def test_bound_failure_is_reported(run):
    an = run.segments[0].anchors()
    # a tiny truncation makes the tail symbols vanish inside the scan
    cert = V.validate_segment(an, V.ValidationConfig(K=(1, 1)))
    assert not cert.validated and cert.stage_failures
