import numpy as np
import pytest

from kshopf import ks
from kshopf.sequences import Layout, Seq1D, XVector
from kshopf.tail_bounds import PolySymbol

from helpers import fd_derivative_errors, random_anchors, random_x
from oracles import pad, pde_F1, pde_F2


def test_F1_matches_grid_oracle():
    rng = np.random.default_rng(0)
    x = random_x(rng, 2, 5)
    got = ks.eval_F1(x.lambda2, x.y).coef.mid
    ref = pde_F1(complex(x.lambda2.mid), x.y.coef.mid)
    n = max(len(got), len(ref))
    got, ref = pad(got, (n,)), pad(ref, (n,))
    assert np.max(np.abs(got - ref)) < 1e-10 * np.max(np.abs(ref))


def test_F2_matches_grid_oracle():
    rng = np.random.default_rng(1)
    x = random_x(rng, 3, 4)
    got = ks.eval_F2(x).coef.mid
    ref = pde_F2(complex(x.lambda1.mid), complex(x.lambda2.mid), complex(x.a.mid), x.y.coef.mid, x.z.coef.mid)
    shape = tuple(max(a, b) for a, b in zip(got.shape, ref.shape))
    got, ref = pad(got, shape), pad(ref, shape)
    assert np.max(np.abs(got - ref)) < 1e-10 * np.max(np.abs(ref))


def test_residual_encloses_point_value():
    rng = np.random.default_rng(2)
    x = random_x(rng, 2, 3)
    an = random_anchors(rng, 2, 3)
    r = ks.eval_Hs(x, 0.0, an)
    assert np.all(r.rad >= 0)
    assert np.all(np.isfinite(r.mid))


def test_residual_of_symmetric_point_is_symmetric():
    rng = np.random.default_rng(3)
    x = random_x(rng, 2, 3)
    an = random_anchors(rng, 2, 3)
    L = Layout(4, 6)
    r = ks.eval_Hs(x, 0.0, an, L)
    assert np.max(np.abs(L.conjugate_vector(r).mid - r.mid)) < 1e-12


def test_scalar_slots_carry_phase_conditions():
    rng = np.random.default_rng(4)
    x = random_x(rng, 2, 3)
    an = random_anchors(rng, 2, 3)
    L = Layout(4, 6)
    r = ks.eval_Hs(x, 0.0, an, L).mid
    G1, G2, G3, G4 = (g.mid for g in ks.eval_G(x, an))
    assert np.allclose([r[1], r[2], r[L.y0], r[L.z00]], [G1, G4, G2, G3], atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_derivatives_match_finite_differences(seed):
    e1, e2, e3 = fd_derivative_errors(np.random.default_rng(seed))
    assert max(e1, e2, e3) < 1e-5


def test_segment_jets_match_endpoints():
    rng = np.random.default_rng(5)
    x0, x1 = random_x(rng, 2, 3), random_x(rng, 2, 3)
    for s in (0, 1):
        j = ks.XJet.segment(x0, x1, s)
        ref = x0 if s == 0 else x1
        assert np.array_equal(j.z.v.mid, ref.z.coef.mid)


def test_parameter_anchors_use_amplitude_covector():
    rng = np.random.default_rng(6)
    x = random_x(rng, 1, 2)
    an = ks.ProblemAnchors.parameter_in_a(x)
    assert an.degenerate
    q = ks.a_covector(x)
    assert complex(q.a.mid) == 1 and complex(q.lambda1.mid) == 0


def test_tail_polys_and_vanishing_check():
    x = XVector(0.3, 0.13, 0.0, Seq1D(np.zeros(5)), random_x(np.random.default_rng(7), 1, 2).z)
    P1, P2 = ks.tail_polys(x)[:2]
    assert isinstance(P1, PolySymbol) and P2.e == 1
    ks.check_tails(x, (2, 4))
    bad = XVector(0.3, 0.01, 0.0, Seq1D(np.zeros(5)), x.z)
    with pytest.raises(ks.TailMayVanish):
        ks.check_tails(bad, (2, 4))


def test_approximate_inverse_preserves_symmetry():
    rng = np.random.default_rng(8)
    x = random_x(rng, 2, 3)
    x = XVector(0.3, 0.25, x.a, x.y, x.z)
    an = ks.ProblemAnchors.parameter_in_a(x)
    A, cond = ks.build_A(0.0, an, (2, 3))
    assert cond > 0
    assert ks.preserves_symmetry(A, random_x(rng, 2, 3))
