"""Floating-point numerics: Newton solves, tangents, branch stepping.

Nothing here is rigorous; the output anchors are handed to the validator.
Newton solves the self-anchored system ``H^{x}(x) = 0``: the phase and
normalization conditions use the current iterate as their anchor, so the
converged point satisfies the conditions with itself as anchor.  On the
conjugate-symmetric subspace ``conj(z)`` equals the index reflection of
``z``, which makes the self-anchored map analytic there.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .ball import Ball
from .ks import ProblemAnchors, _col_vector, a_covector, jacobian_at, residual_jets, XJet, anchor_jets
from .sequences import (
    Layout,
    Seq1D,
    Seq2D,
    XVector,
    component_norm,
    dump_json,
    symmetrize,
    xvector_to_json,
)

log = logging.getLogger(__name__)


class NoConvergence(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    pass


class NoCrossing(RuntimeError):
    pass


class StepFailure(RuntimeError):
    pass


# helpers --------------------------------------------------------------------------------

def _thin(x: XVector) -> XVector:
    return x.midpoint()


def fit(x: XVector, K) -> XVector:
    """Midpoint copy of ``x`` padded or cropped to truncation ``K``."""
    from .ball import pad_center
    M, N = K
    x = _thin(x)
    y = Seq1D(pad_center(x.y.coef, (2 * N + 1,)), x.nu2)
    z = Seq2D(pad_center(x.z.coef, (2 * M + 1, 2 * N + 1)), x.nu1, x.nu2)
    return XVector(x.lambda1, x.lambda2, x.a, y, z)


def _flat(x: XVector, L: Layout) -> np.ndarray:
    return x.to_flat(L).mid


def _unflat(v: np.ndarray, L: Layout) -> XVector:
    return XVector.from_flat(Ball(v), L)


def residual_norm(r: np.ndarray, L: Layout) -> float:
    """Weighted X norm of a floating residual vector."""
    w = L.weights_up
    a = np.abs(r)
    return float(max(a[L.sc].max(initial=0.0), (a[L.ys] * w[L.ys]).sum(), (a[L.zs] * w[L.zs]).sum()))


def self_anchor_rows(x: XVector, L: Layout) -> np.ndarray:
    """Derivative of the scalar conditions with respect to their anchor at ``x``."""
    x = fit(x, L.K)
    out = np.zeros((L.dim, L.dim), dtype=complex)
    y, z = x.y.coef.mid, x.z.coef.mid
    a = complex(x.a.mid)
    k = np.arange(-L.N, L.N + 1)
    j = np.arange(-L.M, L.M + 1)[:, None]
    zr = z[::-1, ::-1]
    out[1] = _col_vector(Ball(j ** 2 * zr), L, 2).mid
    out[2] = _col_vector(Ball(1j * j * z), L, 2).mid
    out[L.y0] = _col_vector(Ball(1j * k * y), L, 1).mid
    row = _col_vector(Ball(1j * k * z[L.M]), L, 1).mid + _col_vector(Ball(1j * k * a * z), L, 2).mid
    row[2] = np.sum(1j * k * z * z)
    out[L.z00] = row
    return out


def _self_anchors(x: XVector, q: XVector, c: complex, mode: str) -> ProblemAnchors:
    return ProblemAnchors(x, x, q, q, c, c, mode)


def truncated_system(x: XVector, q: XVector, c: complex, mode: str, L: Layout, self_anchored=True):
    """Residual and Jacobian (midpoints) of the truncated self-anchored system."""
    an = _self_anchors(x, q, c, mode)
    r = residual_jets(XJet.point(x), *anchor_jets(an, 0)).flat(L).mid
    J = jacobian_at(x, an, rows=L, cols=L).mid
    if self_anchored:
        J = J + self_anchor_rows(x, L)
    return r, J


def _interp(anchors: ProblemAnchors, s: float):
    if s == 0:
        return anchors.q0, anchors.c0
    if s == 1:
        return anchors.q1, anchors.c1
    q = anchors.q0 + (anchors.q1 - anchors.q0).scale(float(s))
    return _thin(q), anchors.c0 + s * (anchors.c1 - anchors.c0)


def newton_solve(x0: XVector, s, anchors: ProblemAnchors, K, tol: float = 1e-11, max_iter: int = 25,
                 self_anchored: bool = True) -> XVector:
    """Newton iteration for ``H_s(x) = 0`` on truncation ``K``.

    The continuation equation comes from ``anchors`` at ``s``; the scalar
    conditions are anchored at the iterate itself (``self_anchored``) or at
    the anchors' ``xhat``.  Iterates are symmetrized.
    """
    L = Layout(K[0], K[1], x0.nu1, x0.nu2)
    q, c = _interp(anchors, s)
    x = symmetrize(fit(x0, K))
    last = math.inf
    for it in range(max_iter + 1):
        if self_anchored:
            r, J = truncated_system(x, q, c, anchors.mode, L, True)
        else:
            an = ProblemAnchors(anchors.xhat0, anchors.xhat1, q, q, c, c, anchors.mode)
            xh, qq, cc = anchor_jets(an, s)
            r = residual_jets(XJet.point(x), xh, qq, cc).flat(L).mid
            J = jacobian_at(x, an, s, rows=L, cols=L).mid
        res = residual_norm(r, L)
        if not np.isfinite(res):
            raise NoConvergence("residual overflow")
        if res <= tol:
            return x
        if it == max_iter:
            break
        if it > 4 and res > 1e3 * max(last, tol):
            raise NoConvergence(f"divergence, residual {res:.3e}")
        last = min(last, res)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", RuntimeWarning)
                dx = np.linalg.solve(J, r)
        except (np.linalg.LinAlgError, RuntimeWarning) as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian("non-finite Newton step")
        x = symmetrize(_unflat(_flat(x, L) - dx, L))
    raise NoConvergence(f"no convergence in {max_iter} iterations (residual {res:.3e})")


def null_vector(J: np.ndarray, L: Layout):
    """Symmetric unit null direction of a (rows < cols) matrix and the kernel gap.

    Returns ``(v, ratio)`` where ``ratio`` is the second-smallest over the
    largest singular value (small means the kernel is not one-dimensional).
    """
    _, sv, vh = np.linalg.svd(J)
    v = np.conj(vh[-1])
    n = J.shape[1]
    full = np.concatenate([sv, np.zeros(max(0, n - sv.size))])
    ratio = float(full[-2] / full[0]) if full[0] > 0 else 0.0
    best = None
    for ph in (1.0, 1j):
        w = ph * v
        ws = 0.5 * (w + np.conj(w[L.reflect]))
        if best is None or np.linalg.norm(ws) > np.linalg.norm(best):
            best = ws
    best = best / np.linalg.norm(best)
    return best, ratio


def kernel_tangent(s, anchors: ProblemAnchors, K, x: XVector | None = None) -> XVector:
    """Unit symmetric approximate null vector of DH without the continuation row."""
    L = Layout(K[0], K[1], anchors.xhat0.nu1, anchors.xhat0.nu2)
    if x is None:
        x = anchors.xhat1 if s == 1 else anchors.xhat0
    q, c = _interp(anchors, s)
    _, J = truncated_system(x, q, c, anchors.mode, L, True)
    v, ratio = null_vector(J[1:], L)
    if ratio < 1e-10:
        warnings.warn("kernel of the truncated Jacobian may not be one-dimensional", RuntimeWarning)
    return _unflat(v, L)


def reflect_covector(v: XVector) -> XVector:
    """Covector ``q`` with ``<x, q> = sum x conj(v)`` (index reflection of v)."""
    return XVector(v.lambda1, v.lambda2, v.a, Seq1D(v.y.coef[::-1], v.nu2), Seq2D(v.z.coef[::-1, ::-1], v.nu1, v.nu2))


def pairing(x: XVector, q: XVector) -> complex:
    M, N = max(x.z.M, q.z.M), max(x.K[1], q.K[1])
    a, b = x.padded(M, N), q.padded(M, N)
    s = complex(np.sum(a.scalars().mid * b.scalars().mid))
    return s + complex(np.sum(a.y.coef.mid * b.y.coef.mid)) + complex(np.sum(a.z.coef.mid * b.z.coef.mid))


# steady states ---------------------------------------------------------------------------

def _steady_system(lam2: float, y: np.ndarray):
    N = (y.size - 1) // 2
    k = np.arange(-N, N + 1)
    yy = np.convolve(y, y)[N:3 * N + 1]
    r = lam2 * k ** 4 * y - k ** 2 * y - 1j * k * yy
    r[N] = np.sum(1j * k * y * y)
    idx = np.subtract.outer(k, k)
    ok = np.abs(idx) <= N
    C = np.where(ok, y[np.clip(idx + N, 0, 2 * N)], 0)
    J = np.diag(lam2 * k ** 4 - k ** 2).astype(complex) - 2j * k[:, None] * C
    J[N] = 2j * k * y
    return r, J


def steady_solve(lam2: float, y0: np.ndarray, tol: float = 1e-12, max_iter: int = 30) -> np.ndarray:
    """Newton for the stationary problem with the phase condition at k = 0."""
    y = np.asarray(y0, dtype=complex).copy()
    for _ in range(max_iter):
        r, J = _steady_system(lam2, y)
        if np.max(np.abs(r)) <= tol:
            return 0.5 * (y + np.conj(y[::-1]))
        y = y - np.linalg.solve(J, r)
        y = 0.5 * (y + np.conj(y[::-1]))
    r, _ = _steady_system(lam2, y)
    if np.max(np.abs(r)) <= tol * 100:
        return y
    raise NoConvergence(f"steady solve failed at lambda2={lam2}")


def steady_seed(N: int, m: int = 2, lam2: float = 0.245) -> np.ndarray:
    """Normal-form guess on the branch of wavenumber ``m`` bifurcating at ``lambda2 = 1/m^2``.

    With ``P(k) = lambda2 k^4 - k^2`` the balance of modes ``m`` and ``2m`` gives
    ``A^2 = -P(m) P(2m) / (4 m^2)`` and ``y_{2m} = 2 i m A^2 / P(2m)``.
    """
    y = np.zeros(2 * N + 1, dtype=complex)

    def P(k):
        return lam2 * k ** 4 - k ** 2
    A2 = -P(m) * P(2 * m) / (4.0 * m * m)
    if A2 <= 0:
        raise ValueError("lambda2 is on the wrong side of the bifurcation")
    A = math.sqrt(A2)
    y[N + m] = y[N - m] = A
    if 2 * m <= N:
        y[N + 2 * m] = 2j * m * A2 / P(2 * m)
        y[N - 2 * m] = np.conj(y[N + 2 * m])
    return y


def steady_branch(lam2_values, N: int, m: int = 2, y0: np.ndarray | None = None):
    """Follow the steady branch through ``lam2_values`` (natural continuation)."""
    out = []
    y = steady_seed(N, m, lam2_values[0]) if y0 is None else y0
    for lam2 in lam2_values:
        guess = y
        if len(out) >= 2:
            (l0, ya), (l1, yb) = out[-2], out[-1]
            guess = yb + (yb - ya) * ((lam2 - l1) / (l1 - l0))
        y = steady_solve(lam2, guess)
        out.append((float(lam2), y))
    return out


def steady_linearization(lam2: float, y: np.ndarray) -> np.ndarray:
    """``DF1`` on the modes ``k != 0``."""
    N = (y.size - 1) // 2
    _, J = _steady_system(lam2, y)
    J = J.copy()
    k = np.arange(-N, N + 1)
    keep = k != 0
    return J[np.ix_(keep, keep)]


# Hopf point ------------------------------------------------------------------------------

def _critical_real_part(mat: np.ndarray) -> float:
    ev = np.linalg.eigvals(-mat)
    cx = ev[np.abs(ev.imag) > 1e-7]
    return float(np.max(cx.real)) if cx.size else -math.inf


def locate_crossing(matrix_fn, lo: float, hi: float, n_grid: int = 40, xtol: float = 1e-13):
    """Parameter where a complex pair of ``-matrix_fn(p)`` crosses the imaginary axis.

    Returns ``(p, omega, eigenvector)`` with ``-matrix_fn(p) v = i omega v``,
    ``omega > 0``.  Raises :class:`NoCrossing` if none is found on ``[lo, hi]``.
    """
    grid = np.linspace(hi, lo, n_grid)
    vals = [_critical_real_part(matrix_fn(p)) for p in grid]
    for (p0, f0), (p1, f1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if np.isfinite(f0) and np.isfinite(f1) and f0 * f1 < 0:
            p = optimize.brentq(lambda t: _critical_real_part(matrix_fn(t)), min(p0, p1), max(p0, p1),
                                xtol=xtol, rtol=4 * np.finfo(float).eps)
            ev, V = np.linalg.eig(-matrix_fn(p))
            cand = np.where(ev.imag > 1e-7)[0]
            i = cand[np.argmin(np.abs(ev[cand].real))]
            return float(p), float(ev[i].imag), V[:, i]
    raise NoCrossing(f"no eigenvalue crossing on [{lo}, {hi}]")


def hopf_z_from_eigvec(phi: np.ndarray, M: int, N: int, nu1: float, nu2: float) -> Seq2D:
    """``z_{1,k} = phi_k``, ``z_{-1,k} = conj(phi_{-k})``, scaled so that
    ``sum j^2 |z|^2 = 1`` and rotated so that ``sum i j z^2 = 0``."""
    S = np.sum(phi * phi)
    phi = phi * np.exp(-0.5j * np.angle(S))
    phi = phi / math.sqrt(2.0 * np.sum(np.abs(phi) ** 2))
    z = np.zeros((2 * M + 1, 2 * N + 1), dtype=complex)
    z[M + 1] = phi
    z[M - 1] = np.conj(phi[::-1])
    return Seq2D(Ball(z), nu1, nu2)


def choose_spatial_phase(y: np.ndarray, phi: np.ndarray, m: int):
    """Translate ``(y, phi)`` to the admissible spatial phase maximizing ``|sum phi^2|``.

    The phase condition on ``y`` admits the shifts ``0`` and ``pi/(2m)`` of a
    branch with wavenumbers in ``m Z``.  For one of them the critical
    eigenvector can satisfy ``phi_{-k} = i phi_k``, so ``sum phi^2 = 0`` and the
    bilinear time-phase condition degenerates; the other shift avoids this.
    """
    N = (y.size - 1) // 2
    k = np.arange(-N, N + 1)
    best = None
    for theta in (0.0, math.pi / (2 * m)):
        e = np.exp(1j * k * theta)
        ys, ps = y * e, phi * e
        g2 = abs(np.sum(1j * k * ys * ys))
        if g2 > 1e-8 * max(1.0, np.sum(np.abs(ys))):
            continue
        score = abs(np.sum(ps * ps)) / max(np.sum(np.abs(ps) ** 2), 1e-300)
        if best is None or score > best[0]:
            best = (score, ys, ps)
    if best is None:
        return y, phi
    return best[1], best[2]


def initial_hopf_guess(lambda2_range=(0.10, 0.245), K=(10, 16), nu1: float = 1.05, nu2: float = 1.05,
                       m: int = 2, n_steps: int = 60) -> XVector:
    """Blow-up seed at the Hopf point of the steady branch of wavenumber ``m``."""
    M, N = K
    lo, hi = sorted(lambda2_range)
    lams = np.linspace(hi, lo, n_steps)
    branch = steady_branch(lams, N, m)
    ys = {round(l, 15): y for l, y in branch}

    def nearest(p):
        key = min(ys, key=lambda l: abs(l - p))
        return ys[key]

    def mat(p):
        y = steady_solve(p, nearest(p))
        return steady_linearization(p, y)

    p, omega, v = locate_crossing(mat, lo, hi, n_grid=n_steps)
    y = steady_solve(p, nearest(p))
    phi = np.zeros(2 * N + 1, dtype=complex)
    k = np.arange(-N, N + 1)
    phi[k != 0] = v
    y, phi = choose_spatial_phase(y, phi, m)
    z = hopf_z_from_eigvec(phi, M, N, nu1, nu2)
    return XVector(1.0 / omega, p, 0.0, Seq1D(Ball(y), nu2), z)


# branches --------------------------------------------------------------------------------

@dataclass
class BranchSegment:
    xhat0: XVector
    xhat1: XVector
    tangent: XVector | None
    step: float
    residuals: tuple
    mode: str = "parameter_in_a"
    q0: XVector | None = None
    q1: XVector | None = None
    c0: complex = 0.0
    c1: complex = 0.0

    def anchors(self) -> ProblemAnchors:
        if self.mode == "parameter_in_a":
            return ProblemAnchors.parameter_in_a(self.xhat0, self.xhat1)
        return ProblemAnchors(self.xhat0, self.xhat1, self.q0, self.q1, self.c0, self.c1, self.mode)


@dataclass
class BranchRun:
    segments: list = field(default_factory=list)
    aborted: str | None = None

    @property
    def hopf_crossings(self) -> list:
        out = []
        for i, s in enumerate(self.segments):
            a0, a1 = complex(s.xhat0.a.mid).real, complex(s.xhat1.a.mid).real
            if a0 * a1 < 0:
                out.append(i)
        return out

    def points(self) -> list:
        if not self.segments:
            return []
        return [self.segments[0].xhat0] + [s.xhat1 for s in self.segments]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["segment", "s", "lambda1", "lambda2", "a", "norm_y", "norm_z"])
            for i, s in enumerate(self.segments):
                for sig, x in ((0, s.xhat0), (1, s.xhat1)):
                    _, ny, nz = component_norm(x)
                    w.writerow([i, sig, repr(complex(x.lambda1.mid).real), repr(complex(x.lambda2.mid).real),
                                repr(complex(x.a.mid).real), repr(ny), repr(nz)])

    def dump_anchors(self, directory) -> list:
        import os
        paths = []
        for i, x in enumerate(self.points()):
            p = os.path.join(directory, f"anchor_{i:03d}.json")
            dump_json(xvector_to_json(x), p)
            paths.append(p)
        return paths


@dataclass
class StepConfig:
    K: tuple = (10, 16)
    mode: str = "parameter_in_a"
    a_from: float = -0.005
    a_to: float = 0.005
    a_step: float = 0.002
    newton_tol: float = 1e-11
    max_iter: int = 25
    min_step: float = 1e-6
    max_segments: int = 200


def a_grid(a_from: float, a_to: float, a_step: float) -> list:
    n = int(math.floor((a_to - a_from) / a_step + 1e-9))
    return [a_from + i * a_step for i in range(n + 1)]


def _solve_at_a(x: XVector, a: float, cfg: StepConfig) -> XVector:
    q = a_covector(fit(x, cfg.K))
    an = ProblemAnchors.single(x, q, complex(a), "parameter_in_a")
    guess = XVector(x.lambda1, x.lambda2, a, x.y, x.z)
    return newton_solve(guess, 0.0, an, cfg.K, cfg.newton_tol, cfg.max_iter)


def _res(x: XVector, q, c, mode, K) -> float:
    L = Layout(K[0], K[1], x.nu1, x.nu2)
    r, _ = truncated_system(x, q, c, mode, L, False)
    return residual_norm(r, L)


def step_branch(seed: XVector, cfg: StepConfig) -> BranchRun:
    """Predictor-corrector run starting from ``seed``."""
    if cfg.mode == "parameter_in_a":
        return _run_parameter(seed, cfg)
    if cfg.mode == "pseudo_arclength":
        return _run_arclength(seed, cfg)
    raise ValueError(f"unknown mode {cfg.mode!r}")


def _run_parameter(seed: XVector, cfg: StepConfig) -> BranchRun:
    run = BranchRun()
    targets = a_grid(cfg.a_from, cfg.a_to, cfg.a_step)
    try:
        x = _solve_at_a(fit(seed, cfg.K), targets[0], cfg)
    except (NoConvergence, SingularJacobian) as exc:
        run.aborted = f"initial solve: {exc}"
        return run
    prev = None
    a = targets[0]
    i = 1
    h = cfg.a_step
    while i < len(targets) and len(run.segments) < cfg.max_segments:
        a_next = min(a + h, targets[i]) if h > 0 else targets[i]
        if a_next == a:
            raise StepFailure("a_0 == a_1 is not allowed in parameter mode")
        guess = x
        if prev is not None:
            t = (a_next - a) / (a - complex(prev.a.mid).real)
            guess = symmetrize(x + (x - prev).scale(t))
        try:
            x1 = _solve_at_a(guess, a_next, cfg)
        except (NoConvergence, SingularJacobian) as exc:
            h = 0.5 * (a_next - a)
            if h < cfg.min_step:
                run.aborted = f"step below minimum at a={a}: {exc}"
                return run
            continue
        q = a_covector(x1)
        r0 = _res(x, q, complex(x.a.mid), "parameter_in_a", cfg.K)
        r1 = _res(x1, q, complex(x1.a.mid), "parameter_in_a", cfg.K)
        run.segments.append(BranchSegment(x, x1, None, a_next - a, (r0, r1)))
        prev, x, a = x, x1, a_next
        if abs(a - targets[i]) < 1e-15:
            i += 1
            h = cfg.a_step
    return run


def _run_arclength(seed: XVector, cfg: StepConfig) -> BranchRun:
    run = BranchRun()
    K = cfg.K
    try:
        x = _solve_at_a(fit(seed, K), cfg.a_from, cfg)
    except (NoConvergence, SingularJacobian) as exc:
        run.aborted = f"initial solve: {exc}"
        return run
    L = Layout(K[0], K[1], x.nu1, x.nu2)

    def tangent(x, orient=None):
        _, J = truncated_system(x, a_covector(x), complex(x.a.mid), "parameter_in_a", L, True)
        v, _ = null_vector(J[1:], L)
        vx = _unflat(v, L)
        sgn = complex(vx.a.mid).real if orient is None else pairing(vx, orient).real
        return vx.scale(-1.0) if sgn < 0 else vx

    v = tangent(x)
    h = cfg.a_step
    while complex(x.a.mid).real < cfg.a_to and len(run.segments) < cfg.max_segments:
        q0 = reflect_covector(v)
        c0 = pairing(x, q0)
        guess = symmetrize(x + v.scale(h))
        an = ProblemAnchors.single(x, q0, c0 + h, "pseudo_arclength")
        try:
            x1 = newton_solve(guess, 0.0, an, K, cfg.newton_tol, cfg.max_iter)
        except (NoConvergence, SingularJacobian) as exc:
            h *= 0.5
            if h < cfg.min_step:
                run.aborted = f"step below minimum: {exc}"
                return run
            continue
        v1 = tangent(x1, q0)
        q1 = reflect_covector(v1)
        c1 = pairing(x1, q1)
        r0 = _res(x, q0, c0, "pseudo_arclength", K)
        r1 = _res(x1, q1, c1, "pseudo_arclength", K)
        run.segments.append(BranchSegment(x, x1, v, h, (r0, r1), "pseudo_arclength", q0, q1, c0, c1))
        x, v = x1, v1
    return run
