import warnings

import numpy as np
import pytest

from kshopf import continuation as C
from kshopf import ks
from kshopf.sequences import Layout, XVector, is_symmetric

K = (4, 8)


@pytest.fixture(scope="module")
def seed():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return C.initial_hopf_guess((0.10, 0.245), K)


@pytest.fixture(scope="module")
def run(seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return C.step_branch(seed, C.StepConfig(K=K))


def _solve_point(seed, a=-0.001):
    return C._solve_at_a(seed, a, C.StepConfig(K=K))


def test_planted_crossing_frequency():
    omega = 1.7

    def mat(p):
        B = np.zeros((4, 4))
        B[:2, :2] = [[p - 0.3, -omega], [omega, p - 0.3]]
        B[2, 2], B[3, 3] = -1.0, -2.0
        return -B
    p, w, v = C.locate_crossing(mat, 0.0, 1.0)
    assert abs(p - 0.3) < 1e-10
    assert abs(w - omega) < 1e-8
    assert np.linalg.norm(-mat(p) @ v - 1j * w * v) < 1e-10


def test_no_crossing_raises():
    with pytest.raises(C.NoCrossing):
        C.locate_crossing(lambda p: np.eye(2) * (1 + p), 0.0, 1.0, n_grid=5)


def test_hopf_seed_normalized_and_symmetric(seed):
    assert is_symmetric(seed, 1e-12)
    z = seed.z.coef.mid
    j = np.arange(-seed.z.M, seed.z.M + 1)[:, None]
    assert abs(np.sum(j ** 2 * np.abs(z) ** 2) - 1) < 1e-12
    # the time-phase condition is not degenerate: sum of z_{1,k}^2 is bounded away from 0
    assert abs(np.sum(z[seed.z.M + 1] ** 2)) > 0.1
    assert 0.12 < complex(seed.lambda2.mid).real < 0.14
    assert complex(seed.lambda1.mid).real > 0


def test_steady_seed_guards():
    with pytest.raises(ValueError):
        C.steady_seed(8, 2, lam2=0.3)
    y = C.steady_solve(0.2, C.steady_seed(8, 2, 0.2))
    r, _ = C._steady_system(0.2, y)
    assert np.max(np.abs(r)) < 1e-10
    assert np.max(np.abs(y)) > 0.1


def test_newton_at_root_returns_immediately(seed):
    x = _solve_point(seed)
    an = ks.ProblemAnchors.single(x, ks.a_covector(x), complex(x.a.mid), "parameter_in_a")
    y = C.newton_solve(x, 0.0, an, K, max_iter=0)
    assert np.array_equal(y.z.coef.mid, x.z.coef.mid)


def test_newton_converges_quadratically(seed):
    x = _solve_point(seed)
    rng = np.random.default_rng(0)
    L = Layout(*K)
    pert = XVector.from_flat(1e-4 * (rng.standard_normal(L.dim) + 0j), L)
    an = ks.ProblemAnchors.single(x, ks.a_covector(x), complex(x.a.mid), "parameter_in_a")
    # two steps from 1e-4 reach 1e-10 only with quadratic convergence
    C.newton_solve(x + pert, 0.0, an, K, tol=1e-10, max_iter=2)


def test_newton_far_start_fails_loudly(seed):
    x = _solve_point(seed)
    far = XVector(x.lambda1, x.lambda2, x.a, x.y.scale(40.0), x.z.scale(40.0))
    an = ks.ProblemAnchors.single(x, ks.a_covector(x), complex(x.a.mid), "parameter_in_a")
    with pytest.raises((C.NoConvergence, C.SingularJacobian)):
        C.newton_solve(far, 0.0, an, K, max_iter=4)


def test_null_vector_of_zero_column():
    L = Layout(0, 1)
    rng = np.random.default_rng(1)
    J = rng.standard_normal((L.dim - 1, L.dim)) + 0j
    J[:, L.y0] = 0
    v, ratio = C.null_vector(J, L)
    e = np.zeros(L.dim)
    e[L.y0] = 1
    assert abs(abs(v[L.y0]) - 1) < 1e-12 and np.linalg.norm(np.abs(v) - e) < 1e-12
    assert ratio > 0


def test_kernel_tangent_is_symmetric_null_direction(run):
    seg = run.segments[0]
    an = seg.anchors()
    v = C.kernel_tangent(0, an, K)
    assert is_symmetric(v, 1e-12)
    L = Layout(*K)
    _, J = C.truncated_system(seg.xhat0, an.q0, an.c0, an.mode, L, True)
    vf = v.to_flat(L).mid
    assert np.linalg.norm(J[1:] @ vf) / np.linalg.norm(J) < 1e-8


def test_parameter_run_crosses_once(run):
    assert run.aborted is None
    assert len(run.segments) == 5
    assert run.hopf_crossings == [2]
    for s0, s1 in zip(run.segments, run.segments[1:]):
        assert np.array_equal(s0.xhat1.z.coef.mid, s1.xhat0.z.coef.mid)
    for s in run.segments:
        assert max(s.residuals) <= 1e-10
        assert is_symmetric(s.xhat0, 1e-12) and is_symmetric(s.xhat1, 1e-12)
        an = s.anchors()
        assert an.c0 == complex(s.xhat0.a.mid) and an.c1 == complex(s.xhat1.a.mid)


def test_equal_amplitudes_forbidden(run):
    x = run.segments[0].xhat0
    y = XVector(x.lambda1, x.lambda2, x.a, x.y, x.z)
    with pytest.raises(ValueError):
        ks.ProblemAnchors.parameter_in_a(x, y)


def test_branch_exports(run, tmp_path):
    run.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "segment,s,lambda1,lambda2,a,norm_y,norm_z" and len(lines) == 11
    paths = run.dump_anchors(tmp_path)
    assert len(paths) == 6


def test_arclength_run_moves_through_zero(seed):
    cfg = C.StepConfig(K=K, mode="pseudo_arclength", a_from=-0.002, a_to=0.002, a_step=0.002)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = C.step_branch(seed, cfg)
    assert r.aborted is None and len(r.segments) >= 2
    for s in r.segments:
        assert s.mode == "pseudo_arclength" and max(s.residuals) <= 1e-9
