"""Rigorous bounds for the radii polynomial, for single solutions and segments.

For a segment ``s -> xh_s = xh_0 + s x_delta`` the approximate inverse is
``A_s = (1 - s) A_0 + s A_1`` and the approximate derivative
``Ad_s = (1 - s) Ad_0 + s Ad_1`` (both affine, tails included).  Every
s-dependent quantity ``f(s)`` is bounded entrywise by

    max(|f(0)|, |f(1)|) + (1/8) sup_s |f''(s)|

before taking norms.  Second derivatives in s are produced by evaluating the
Jacobian coefficients along the segment with second-order jets; the value
part of those jets is an interval hull over ``s in [0, 1]``.

The operator norm on X is bounded from 3x3 block-norm ("component") matrices
by the max over output blocks of the row sums.  A single solution is the
degenerate segment ``xh_0 = xh_1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import correlate

from .ball import Ball, matmul, matmul_up, sum_up, up
from .interval import ScalarInterval, iv_add, iv_mul
from .ks import (
    ProblemAnchors,
    anchor_jets,
    assemble,
    build_A,
    build_A_dagger,
    coefficient_jets,
    residual_jets,
    segment_coefficients,
    segment_residual,
    tail_polys,
    XJet,
)
from .operators import (
    EventuallyDiagonalOperator,
    component_norms_abs,
    op_norm_bound,
)
from .sequences import Layout, XVector, abs_norm1d, abs_norm2d, component_norm, weights_1d, weights_2d
from .tail_bounds import (
    DenominatorMayVanish,
    NonDominantDenominator,
    PolySymbol,
    RationalDiagonalSymbol,
    tail_norm_bound,
    verify_denominator_nonvanishing,
)


class BoundFailure(ArithmeticError):
    """A bound could not be established; ``stage`` names the failing step."""

    def __init__(self, stage: str, msg: str):
        super().__init__(f"{stage}: {msg}")
        self.stage = stage


# radii polynomial ---------------------------------------------------------------

@dataclass
class Certificate:
    mode: str
    Y: float
    Z0: float
    Z1: float
    Z2: float
    R: float
    r_star: float | None = None
    negativity_interval: list | None = None
    validated: bool = False
    hopf_crossing: bool = False
    injective: bool = False
    stage_failures: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("Y", "Z0", "Z1", "Z2", "R", "r_star"):
            v = d[k]
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = repr(v)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def radii_poly(Y, Z0, Z1, Z2, r) -> ScalarInterval:
    """Interval enclosure of ``Y + (Z0 + Z1 - 1) r + Z2 r^2``."""
    I = ScalarInterval.point
    rr = I(float(r))
    lin = iv_add(iv_add(I(Z0), I(Z1)), I(-1.0))
    return iv_add(iv_add(I(Y), iv_mul(lin, rr)), iv_mul(I(Z2), iv_mul(rr, rr)))


def solve_radii(Y: float, Z0: float, Z1: float, Z2: float, R: float, mode: str = "single") -> Certificate:
    """Find ``r* <= R`` with ``p(r*) < 0`` verified in interval arithmetic."""
    cert = Certificate(mode, float(Y), float(Z0), float(Z1), float(Z2), float(R))
    vals = (Y, Z0, Z1, Z2)
    if not all(math.isfinite(v) for v in vals):
        cert.stage_failures.append("radii: non-finite bound")
        return cert
    b = Z0 + Z1 - 1.0
    if b >= 0.0:
        cert.stage_failures.append("radii: Z0 + Z1 >= 1")
        return cert
    if Z2 == 0.0:
        lo, hi = Y / -b, math.inf
    else:
        disc = b * b - 4.0 * Z2 * Y
        if disc <= 0.0:
            cert.stage_failures.append("radii: no negative region")
            return cert
        sq = math.sqrt(disc)
        hi = (-b + sq) / (2.0 * Z2)
        lo = 2.0 * Y / (-b + sq)
    cert.negativity_interval = [lo, hi]
    r = 1.01 * lo if lo > 0 else min(hi, R) * 0.5
    if not r < hi:
        r = 0.5 * (lo + hi)
    cert.r_star = float(r)
    p = radii_poly(Y, Z0, Z1, Z2, r)
    cert.diagnostics["p_r_star"] = [p.lo, p.hi]
    if not p.hi < 0.0:
        cert.stage_failures.append("radii: p(r*) not verified negative")
        return cert
    if r > R:
        cert.stage_failures.append(f"radii: r* = {r:.3e} exceeds R = {R:.1e}")
        return cert
    cert.validated = True
    return cert


# maximum over s -----------------------------------------------------------------------

def max_over_s_norm(B0, B1, B2, rows: Layout | None = None, cols: Layout | None = None) -> float:
    """Bound on ``sup_s ||f(s)||`` from ``f(0)``, ``f(1)`` and ``sup |f''|`` entries.

    Scalars use ``|.|``; vectors use the X norm of ``rows`` (plain max without
    a layout); matrices use the block operator norm bound.
    """
    def mag(b):
        return b.absup() if isinstance(b, Ball) else np.abs(np.asarray(b))

    E = np.maximum(mag(B0), mag(B1))
    E = up(E + up(mag(B2) * 0.125, 1), 1)
    if E.ndim == 0:
        return float(E)
    if E.ndim == 1:
        return float(np.max(E)) if rows is None else vector_norm_abs(E, rows)
    cols = cols or rows
    return op_norm_bound(component_norms_abs(E, rows, cols))


def vector_norm_abs(v: np.ndarray, layout: Layout) -> float:
    w = layout.weights_up
    return float(max(np.max(v[layout.sc]),
                     sum_up(up(v[layout.ys] * w[layout.ys], 1)),
                     sum_up(up(v[layout.zs] * w[layout.zs], 1))))


# segment data ---------------------------------------------------------------------

@dataclass
class Endpoint:
    x: XVector
    A: EventuallyDiagonalOperator
    Ad: EventuallyDiagonalOperator
    P1: PolySymbol
    P2: PolySymbol
    t: Ball          # tail entries of A on the big layout (0 inside K)
    cond: float


@dataclass
class SegmentData:
    anchors: ProblemAnchors
    K: tuple
    L: Layout
    W: Layout
    e0: Endpoint
    e1: Endpoint
    n_scan: int | None = None

    @property
    def degenerate(self) -> bool:
        return self.e0 is self.e1

    @property
    def endpoints(self):
        return (self.e0,) if self.degenerate else (self.e0, self.e1)


def _tail_vector(P1: PolySymbol, P2: PolySymbol, L: Layout, W: Layout) -> Ball:
    t = Ball.zeros(W.dim)
    out = ~W.inside_mask(L)
    for blk, P in ((1, P1), (2, P2)):
        idx = np.arange(W.dim)[W.slot(blk)]
        idx = idx[out[idx]]
        v = P.value(W.j[idx], W.k[idx]).inv()
        t.mid[idx] = v.mid
        t.rad[idx] = v.rad
    return t


def prepare_endpoint(anchors: ProblemAnchors, sigma: int, K, W: Layout, n_scan=None,
                     numeric_inverse=None) -> Endpoint:
    Ad = build_A_dagger(sigma, anchors, K, n_scan)
    A, cond = build_A(sigma, anchors, K, numeric_inverse=numeric_inverse, A_dagger=Ad, n_scan=n_scan)
    x = anchors.xhat1 if sigma else anchors.xhat0
    P1, P2 = tail_polys(x)
    return Endpoint(x, A, Ad, P1, P2, _tail_vector(P1, P2, Ad.finite.rows, W), cond)


def prepare_segment(anchors: ProblemAnchors, K=None, n_scan=None) -> SegmentData:
    K = tuple(anchors.K if K is None else K)
    x0 = anchors.xhat0
    L = Layout(K[0], K[1], x0.nu1, x0.nu2)
    W = Layout(2 * K[0], 2 * K[1], x0.nu1, x0.nu2)
    e0 = prepare_endpoint(anchors, 0, K, W, n_scan)
    single = anchors.xhat0 is anchors.xhat1 and anchors.q0 is anchors.q1 and anchors.c0 == anchors.c1
    e1 = e0 if single else prepare_endpoint(anchors, 1, K, W, n_scan)
    return SegmentData(anchors, K, L, W, e0, e1, n_scan)


def single_data(x: XVector, anchors: ProblemAnchors | None = None, K=None, n_scan=None) -> SegmentData:
    """Segment data of the single solution ``x`` (a degenerate segment)."""
    if anchors is None:
        anchors = ProblemAnchors.parameter_in_a(x)
    else:
        anchors = anchors.endpoint(0)
    return prepare_segment(anchors, K, n_scan)


def _delta(seg: SegmentData):
    """``A_delta`` finite part and tail vector, and ``Ad_delta`` finite part."""
    e0, e1 = seg.e0, seg.e1
    return (e1.A.finite.mat - e0.A.finite.mat, e1.t - e0.t, e1.Ad.finite.mat - e0.Ad.finite.mat)


def _hull(seg: SegmentData):
    e0, e1 = seg.e0, seg.e1
    if seg.degenerate:
        return e0.A.finite.mat, e0.t
    return e0.A.finite.mat.hull(e1.A.finite.mat), e0.t.hull(e1.t)


def _apply(Afin: Ball, t: Ball, v: Ball, L: Layout, W: Layout) -> Ball:
    out = v * t
    idx = L.index_in(W)
    fin = matmul(Afin, v[idx])
    out.mid[idx] = fin.mid
    out.rad[idx] = fin.rad
    return out


def _sup(num: PolySymbol, den: PolySymbol, K, block: int, n_scan) -> float:
    space = "1d" if block == 1 else "2d"
    try:
        return tail_norm_bound(RationalDiagonalSymbol(num, den, K, space), n_scan)
    except (DenominatorMayVanish, NonDominantDenominator) as exc:
        raise BoundFailure("tail", str(exc)) from exc


def _kp(p: int) -> PolySymbol:
    return PolySymbol({p: 1.0})


def _p_delta(seg: SegmentData, block: int) -> PolySymbol:
    P0 = seg.e0.P1 if block == 1 else seg.e0.P2
    P1 = seg.e1.P1 if block == 1 else seg.e1.P2
    coef = {}
    for p in set(P0.coef) | set(P1.coef):
        coef[p] = P1.coef.get(p, Ball(0.0)) - P0.coef.get(p, Ball(0.0))
    return PolySymbol(coef)


def _den(e: Endpoint, block: int) -> PolySymbol:
    return e.P1 if block == 1 else e.P2


# tail-factor providers: bounds on |t(r) * num(r)| over tail rows ----------------

class _TailFactor:
    """Sup over the modes outside a truncation, and per-row values on a grid."""

    def __init__(self, seg: SegmentData, delta: bool):
        self.seg = seg
        self.delta = delta
        self._cache = {}

    def _dens(self, block):
        return [_den(e, block) for e in self.seg.endpoints]

    def __call__(self, num: PolySymbol, block: int, K=None) -> float:
        seg = self.seg
        K = seg.K if K is None else tuple(K)
        key = (tuple(sorted((p, complex(c.mid), float(c.rad)) for p, c in num.coef.items())), block, K)
        if key not in self._cache:
            if self.delta:
                v = up(_sup(_p_delta(seg, block), _den(seg.e0, block), K, block, seg.n_scan)
                       * _sup(num, _den(seg.e1, block), K, block, seg.n_scan), 2)
            else:
                v = max(_sup(num, d, K, block, seg.n_scan) for d in self._dens(block))
            self._cache[key] = float(v)
        return self._cache[key]

    def rows(self, num: PolySymbol, block: int, j: np.ndarray, k: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Per-row bounds on the entries where ``mask`` holds; zero elsewhere."""
        space = "1d" if block == 1 else "2d"
        seg = self.seg
        jm, km = j[mask], k[mask]

        def mag(n, d):
            return RationalDiagonalSymbol(n, d, seg.K, space).entry(jm, km).absup()
        try:
            if self.delta:
                v = up(mag(_p_delta(seg, block), _den(seg.e0, block)) * mag(num, _den(seg.e1, block)), 2)
            else:
                v = np.maximum.reduce([mag(num, d) for d in self._dens(block)])
        except ZeroDivisionError as exc:
            raise BoundFailure("tail", "tail denominator may vanish") from exc
        out = np.zeros(j.shape)
        out[mask] = v
        return out


def _tf_endpoints(seg: SegmentData):
    """``t`` ranging over the endpoint tails (or their hull): max over endpoints."""
    return _TailFactor(seg, delta=False)


def _tf_delta(seg: SegmentData):
    """``t = 1/P(1) - 1/P(0) = -P_delta / (P(0) P(1))``."""
    return _TailFactor(seg, delta=True)


TAIL_BOX_FACTOR = 4


def _conv_tail(a: np.ndarray, i: int, j: int, seg: SegmentData, tf) -> float:
    """Bound on the tail-row part of ``c -> t K (a * c)``, input block j, output block i.

    Weighted column sums are computed exactly for input modes in a box; for
    modes beyond it every output lies outside an enlarged truncation, where
    the sup of ``|t K|`` times the kernel norm applies.
    """
    M, N = seg.K
    W = seg.W
    num = _kp(1)
    na = _conv_norm(a, W)
    if i == 1:
        Na = (a.shape[0] - 1) // 2
        K1 = TAIL_BOX_FACTOR * N
        far = float(up(tf(num, 1, (M, K1)) * na, 2))
        G = K1 + 2 * Na
        kr = np.arange(-G, G + 1)
        g = tf.rows(num, 1, np.zeros_like(kr), kr, np.abs(kr) > N)
        g = up(g * weights_1d(W.nu2, G, True), 1)
        cs = up(correlate(g, a, mode="valid", method="direct"), 2 * a.size + 4)
        cs = up(cs / weights_1d(W.nu2, K1 + Na, False), 1)
        return float(max(np.max(cs), far))
    Ma, Na = (a.shape[0] - 1) // 2, (a.shape[1] - 1) // 2
    J1, K1 = TAIL_BOX_FACTOR * M, 2 * N
    far = float(up(tf(num, 2, (J1, K1)) * na, 2))
    GJ, GK = J1 + 2 * Ma, K1 + 2 * Na
    jj, kk = np.meshgrid(np.arange(-GJ, GJ + 1), np.arange(-GK, GK + 1), indexing="ij")
    g = tf.rows(num, 2, jj, kk, (np.abs(jj) > M) | (np.abs(kk) > N))
    g = up(g * weights_2d(W.nu1, W.nu2, GJ, GK, True), 1)
    cs = up(correlate(g, a, mode="valid", method="direct"), 2 * a.size + 4)
    BJ, BK = J1 + Ma, K1 + Na
    if j == 1:
        cs = up(cs[BJ] / weights_1d(W.nu2, BK, False), 1)
    else:
        cs = up(cs / weights_2d(W.nu1, W.nu2, BJ, BK, False), 1)
    return float(max(np.max(cs), far))


# parts of A L(c) --------------------------------------------------------------------

def _coef_arrays(c: dict):
    """Convolution kernels (abs) by block pair and diagonal symbols by block."""
    conv = {}
    if c.get("ycv") is not None:
        conv[(1, 1)] = up(2.0 * c["ycv"].absup(), 1)
    if c.get("zy") is not None:
        conv[(2, 1)] = c["zy"].absup()
    if c.get("zz") is not None:
        conv[(2, 2)] = c["zz"].absup()
    diag = {}
    if c.get("lam2") is not None:
        diag[1] = PolySymbol({4: c["lam2"]})
    zc = {}
    if c.get("l1l2") is not None:
        zc[4] = c["l1l2"]
    if c.get("l1") is not None:
        zc[2] = -c["l1"]
    if zc:
        diag[2] = PolySymbol(zc)
    return conv, diag


def _scalar_cols_abs(c: dict, t: Ball, W: Layout) -> np.ndarray:
    """``|t(r) * column_c(r)|`` on the big layout for the three scalar columns."""
    from .ks import _col_vector
    out = np.zeros((W.dim, 3))
    for name, blk, col in (("f1_l2", 1, 1), ("f2_l1", 2, 0), ("f2_l2", 2, 1), ("f2_a", 2, 2)):
        if c.get(name) is None:
            continue
        v = _col_vector(c[name], W, blk) * t
        out[:, col] += v.absup()
    return up(out, 1)


def _scalar_cols_comp(S: np.ndarray, W: Layout) -> np.ndarray:
    comp = np.zeros((3, 3))
    w = W.weights_up
    for blk in (1, 2):
        s = W.slot(blk)
        colsum = matmul_up(w[s][None, :], S[s, :])[0]
        comp[blk, 0] = float(sum_up(colsum))
    return comp


def _conv_norm(a: np.ndarray, W: Layout) -> float:
    if a.ndim == 1:
        return abs_norm1d(a, W.nu2)
    return abs_norm2d(a, W.nu1, W.nu2)


def _pad_abs(a: np.ndarray, shape) -> np.ndarray:
    from .ball import pad_center
    return pad_center(Ball(a), shape).mid.real


class ALParts:
    """Entrywise data of ``A L`` split into finite rows and tail rows."""

    def __init__(self, fin: np.ndarray, sc: np.ndarray, conv: dict, diag: dict):
        self.fin, self.sc, self.conv, self.diag = fin, sc, conv, diag

    @staticmethod
    def emax(parts: list) -> "ALParts":
        """Entrywise maximum of absolute values over several parts."""
        p0 = parts[0]
        fin = p0.fin
        sc = p0.sc
        conv = dict(p0.conv)
        for p in parts[1:]:
            fin = np.maximum(fin, p.fin)
            sc = np.maximum(sc, p.sc)
            for k, a in p.conv.items():
                if k in conv:
                    shape = tuple(max(u, v) for u, v in zip(conv[k].shape, a.shape))
                    conv[k] = np.maximum(_pad_abs(conv[k], shape), _pad_abs(a, shape))
                else:
                    conv[k] = a
        return ALParts(fin, sc, conv, {})

    def comp(self, seg: SegmentData, tf) -> np.ndarray:
        C = component_norms_abs(self.fin, seg.L, seg.W)
        C = C + _scalar_cols_comp(self.sc, seg.W)
        for (i, j), a in self.conv.items():
            C[i, j] += _conv_tail(a, i, j, seg, tf)
        for b, sym in self.diag.items():
            C[b, b] += tf(sym, b)
        return up(C, 2)


def al_parts(Afin: Ball, t: Ball, c: dict, seg: SegmentData, outside_only: bool, with_diag: bool) -> ALParts:
    """Parts of ``A L(c)`` (no constant symbols).

    ``outside_only`` keeps, on the finite rows, only the columns outside K
    (the part of the Jacobian not already in ``Ad``); ``with_diag`` includes
    the diagonal symbols on the tail rows.
    """
    Lm = assemble(c, seg.L, seg.W, constant=False)
    if outside_only:
        inside = seg.W.inside_mask(seg.L)
        Lm.mid[:, inside] = 0
        Lm.rad[:, inside] = 0
    fin = matmul(Afin, Lm).absup()
    conv, diag = _coef_arrays(c)
    return ALParts(fin, _scalar_cols_abs(c, t, seg.W), conv, diag if with_diag else {})


def _endpoint_coef(seg: SegmentData, e: Endpoint) -> dict:
    sigma = 0 if e is seg.e0 else 1
    xh, q, _ = anchor_jets(seg.anchors, sigma)
    return coefficient_jets(XJet.point(e.x), xh, q).component("v")


# Y ---------------------------------------------------------------------------------

def _residual_flat(seg: SegmentData, sigma: int) -> Ball:
    x = seg.anchors.xhat1 if sigma else seg.anchors.xhat0
    return residual_jets(XJet.point(x), *anchor_jets(seg.anchors, sigma)).flat(seg.W)


def y_entries(seg: SegmentData):
    """``(|f(0)|, |f(1)|, sup|f''|)`` for ``f(s) = A_s H_s(xh_s)`` on 2K modes."""
    f0 = _apply(seg.e0.A.finite.mat, seg.e0.t, _residual_flat(seg, 0), seg.L, seg.W).absup()
    if seg.degenerate:
        return f0, f0, np.zeros_like(f0)
    f1 = _apply(seg.e1.A.finite.mat, seg.e1.t, _residual_flat(seg, 1), seg.L, seg.W).absup()
    res = segment_residual(seg.anchors)
    h1, h2 = res.flat(seg.W, "d"), res.flat(seg.W, "dd")
    AD, tD, _ = _delta(seg)
    AH, tH = _hull(seg)
    g = _apply(AD, tD, h1, seg.L, seg.W) * Ball(2.0) + _apply(AH, tH, h2, seg.L, seg.W)
    return f0, f1, g.absup()


def y_bound_segment(seg: SegmentData) -> float:
    f0, f1, g = y_entries(seg)
    return max_over_s_norm(f0, f1, g, seg.W)


def y_bound_single(seg: SegmentData) -> float:
    f0, _, _ = y_entries(seg if seg.degenerate else _as_single(seg))
    return vector_norm_abs(f0, seg.W)


# Z0 ---------------------------------------------------------------------------------

def _z0_endpoint_abs(e: Endpoint) -> np.ndarray:
    n = e.A.finite.mat.shape[0]
    P = matmul(e.A.finite.mat, e.Ad.finite.mat)
    E = Ball(np.eye(n, dtype=complex)) - P
    return E.absup()


def _delta_delta_comp(seg: SegmentData) -> np.ndarray:
    """Component matrix of ``A_delta Ad_delta`` (finite part and tail)."""
    if seg.degenerate:
        return np.zeros((3, 3))
    AD, _, DD = _delta(seg)
    C = component_norms_abs(matmul(AD, DD).absup(), seg.L, seg.L)
    for b in (1, 2):
        pd = _p_delta(seg, b)
        tb = up(_sup(pd, _den(seg.e0, b), seg.K, b, seg.n_scan) * _sup(pd, _den(seg.e1, b), seg.K, b, seg.n_scan), 2)
        C[b, b] = max(C[b, b], float(tb))
    return C


def z0_comp(seg: SegmentData):
    E = _z0_endpoint_abs(seg.e0)
    if not seg.degenerate:
        E = np.maximum(E, _z0_endpoint_abs(seg.e1))
    C = component_norms_abs(E, seg.L, seg.L)
    DD = _delta_delta_comp(seg)
    return up(C + 0.25 * DD, 2), DD


def z0_bound_segment(seg: SegmentData) -> float:
    return op_norm_bound(z0_comp(seg)[0])


def z0_bound_single(A: EventuallyDiagonalOperator, A_dagger: EventuallyDiagonalOperator) -> float:
    """``||I - A A_dagger||``; the tails are exact inverses and contribute 0."""
    n = A.finite.mat.shape[0]
    E = (Ball(np.eye(n, dtype=complex)) - matmul(A.finite.mat, A_dagger.finite.mat)).absup()
    L = A.finite.rows
    return op_norm_bound(component_norms_abs(E, L, L))


# Z1 ---------------------------------------------------------------------------------

def z1_endpoint_comp(seg: SegmentData) -> np.ndarray:
    parts = [al_parts(e.A.finite.mat, e.t, _endpoint_coef(seg, e), seg, True, False) for e in seg.endpoints]
    return ALParts.emax(parts).comp(seg, _tf_endpoints(seg))


def z1_curvature_comp(seg: SegmentData, DD: np.ndarray | None = None) -> np.ndarray:
    """Bound on the components of the second s-derivative (before the 1/8)."""
    if seg.degenerate:
        return np.zeros((3, 3))
    if DD is None:
        DD = _delta_delta_comp(seg)
    co = segment_coefficients(seg.anchors)
    AD, tD, _ = _delta(seg)
    AH, tH = _hull(seg)
    J1 = al_parts(AD, tD, co.component("d"), seg, False, True).comp(seg, _tf_delta(seg))
    J2 = al_parts(AH, tH, co.component("dd"), seg, False, True).comp(seg, _tf_endpoints(seg))
    return up(2.0 * DD + 2.0 * J1 + J2, 2)


def z1_bound_segment(seg: SegmentData, DD: np.ndarray | None = None) -> float:
    C = z1_endpoint_comp(seg) + 0.125 * z1_curvature_comp(seg, DD)
    return op_norm_bound(up(C, 1))


def z1_bound_single(seg: SegmentData) -> float:
    return op_norm_bound(z1_endpoint_comp(seg if seg.degenerate else _as_single(seg)))


# Z2 ---------------------------------------------------------------------------------

def d_matrices(norms: dict, R: float) -> dict:
    """Bounds ``D^(p)[n, m]`` on ``D^2H(x + R b)[., c]`` by power p of K."""
    L1 = norms["lambda1"] + R
    L2 = norms["lambda2"] + R
    A = norms["a"] + R
    Y = norms["y"] + R
    Z = norms["z"] + R
    D = {p: np.zeros((3, 3)) for p in (1, 2, 4)}
    D[4][1, 0] = 1.0
    D[4][1, 1] = 1.0
    D[1][1, 1] = 2.0
    D[4][2, 0] = 2 * Z + L1 + L2
    D[2][2, 0] = 1.0
    D[1][2, 0] = 2 * Z + 2 * Y + 2 * Z * Z + 2 * A * Z + 2 * L1 * Z
    D[1][2, 1] = 2 * (Z + L1)
    D[4][2, 2] = L1 + L2
    D[2][2, 2] = 1.0
    D[1][2, 2] = 2 * (Y + L1 + A * Z) + 2 * L1 * (Z + A)
    return {p: up(d, 8) for p, d in D.items()}


def _x_norms(x: XVector) -> dict:
    _, ny, nz = component_norm(x)
    s = x.scalars().absup()
    return {"lambda1": float(s[0]), "lambda2": float(s[1]), "a": float(s[2]), "y": ny, "z": nz}


def a_kp_norms(e: Endpoint, L: Layout, K, n_scan=None) -> dict:
    """``||A_{i n} K^p||`` for p in (1, 2, 4): max of finite and tail parts."""
    absA = e.A.finite.mat.absup()
    kk = np.abs(L.k).astype(float)
    out = {}
    for p in (1, 2, 4):
        C = component_norms_abs(up(absA * kk[None, :] ** p, 2), L, L)
        for b, P in ((1, e.P1), (2, e.P2)):
            C[b, b] = max(C[b, b], _sup(_kp(p), P, K, b, n_scan))
        C[:, 0] = 0.0
        out[p] = C
    return out


def z2_from(e: Endpoint, norms: dict, R: float, L: Layout, K, n_scan=None) -> float:
    N = a_kp_norms(e, L, K, n_scan)
    D = d_matrices(norms, R)
    T = np.zeros((3, 3))
    for p in (1, 2, 4):
        T = T + matmul_up(N[p], D[p])
    return op_norm_bound(up(T, 2))


def z2_bound_segment(seg: SegmentData, R: float) -> float:
    n0 = _x_norms(seg.e0.x)
    n1 = _x_norms(seg.e1.x)
    norms = {k: max(n0[k], n1[k]) for k in n0}
    return max(z2_from(e, norms, R, seg.L, seg.K, seg.n_scan) for e in seg.endpoints)


def z2_bound_single(seg: SegmentData, R: float) -> float:
    e = seg.e0
    return z2_from(e, _x_norms(e.x), R, seg.L, seg.K, seg.n_scan)


def _as_single(seg: SegmentData) -> SegmentData:
    return SegmentData(seg.anchors.endpoint(0), seg.K, seg.L, seg.W, seg.e0, seg.e0, seg.n_scan)


# injectivity -------------------------------------------------------------------------

def _hull_poly(P0: PolySymbol, P1: PolySymbol) -> PolySymbol:
    coef = {}
    for p in set(P0.coef) | set(P1.coef):
        coef[p] = P0.coef.get(p, Ball(0.0)).hull(P1.coef.get(p, Ball(0.0)))
    return PolySymbol(coef, P0.e)


def check_injectivity(A0: EventuallyDiagonalOperator, A1: EventuallyDiagonalOperator,
                      Ad0: EventuallyDiagonalOperator | None = None,
                      Ad1: EventuallyDiagonalOperator | None = None,
                      z0: float | None = None, n_scan=None) -> bool:
    """Injectivity of ``A_s`` for all s in [0, 1].

    (i) the tail entries ``(1 - s)/P(0) + s/P(1) = ((1 - s) P(1) + s P(0)) / (P(0) P(1))``
    have a numerator bounded away from 0 (checked on the hull of the
    coefficients); (ii) ``||I - A_s Ad_s|| < 1`` on the finite block, either
    given as ``z0`` or computed from ``Ad0``, ``Ad1``.
    """
    K = A0.K
    for b in (0, 1):
        t0 = (A0.tail.y_terms if b == 0 else A0.tail.z_terms)[0].den
        t1 = (A1.tail.y_terms if b == 0 else A1.tail.z_terms)[0].den
        h = _hull_poly(t0, t1)
        one = PolySymbol.const(1.0)
        sym = RationalDiagonalSymbol(one, h, K, "1d" if b == 0 else "2d")
        if not verify_denominator_nonvanishing(sym, n_scan):
            return False
    if z0 is None:
        if Ad0 is None or Ad1 is None:
            raise ValueError("need z0 or both A-dagger operators")
        L = A0.finite.rows
        n = L.dim
        E = np.maximum((Ball(np.eye(n, dtype=complex)) - matmul(A0.finite.mat, Ad0.finite.mat)).absup(),
                       (Ball(np.eye(n, dtype=complex)) - matmul(A1.finite.mat, Ad1.finite.mat)).absup())
        DA = A1.finite.mat - A0.finite.mat
        DD = Ad1.finite.mat - Ad0.finite.mat
        E = up(E + 0.25 * matmul(DA, DD).absup(), 1)
        z0 = op_norm_bound(component_norms_abs(E, L, L))
    return bool(z0 < 1.0)


# driver ----------------------------------------------------------------------------------

@dataclass
class ValidationConfig:
    R: float = 1e-4
    n_scan: int | None = None
    cond_threshold: float = 1e12
    K: tuple | None = None


def amplitude_crosses_zero(x0: XVector, x1: XVector) -> bool:
    """``a_0 a_1 < 0`` with both amplitudes bounded away from 0 (real parts)."""
    lo0, hi0 = x0.a.real_bounds()
    lo1, hi1 = x1.a.real_bounds()
    return bool((hi0 < 0 < lo1) or (hi1 < 0 < lo0))


def validate_segment(anchors: ProblemAnchors, config: ValidationConfig | None = None,
                     echo: dict | None = None) -> Certificate:
    """Run the full bound pipeline on one segment (or a single solution)."""
    config = config or ValidationConfig()
    single = anchors.xhat0 is anchors.xhat1
    mode = "single" if single else "segment"
    diag = {}
    try:
        seg = prepare_segment(anchors, config.K, config.n_scan)
        Y = y_bound_segment(seg)
        C0, DD = z0_comp(seg)
        Z0 = op_norm_bound(C0)
        Z1 = z1_bound_segment(seg, DD)
        Z2 = z2_bound_segment(seg, config.R)
        diag["condition"] = [e.cond for e in seg.endpoints]
        if any(c > config.cond_threshold for c in diag["condition"]):
            diag["warning"] = "finite Jacobian ill-conditioned"
    except BoundFailure as exc:
        cert = Certificate(mode, math.inf, math.inf, math.inf, math.inf, config.R)
        cert.stage_failures.append(str(exc))
        cert.config_echo = dict(echo or {})
        return cert
    except Exception as exc:  # tail construction and similar
        cert = Certificate(mode, math.inf, math.inf, math.inf, math.inf, config.R)
        cert.stage_failures.append(f"setup: {type(exc).__name__}: {exc}")
        cert.config_echo = dict(echo or {})
        return cert
    cert = solve_radii(Y, Z0, Z1, Z2, config.R, mode)
    cert.diagnostics.update(diag)
    cert.diagnostics["K"] = list(seg.K)
    cert.diagnostics["n_scan"] = config.n_scan if config.n_scan else max(4 * seg.K[1], 128)
    cert.injective = check_injectivity(seg.e0.A, seg.e1.A, z0=Z0, n_scan=config.n_scan)
    if not cert.injective:
        cert.stage_failures.append("injectivity")
        cert.validated = False
    cert.hopf_crossing = bool(cert.validated and anchors.mode == "parameter_in_a" and not single
                              and amplitude_crosses_zero(anchors.xhat0, anchors.xhat1))
    cert.diagnostics["remark"] = ("smooth branch with a'(s) != 0" if anchors.mode == "parameter_in_a"
                                  else "pseudo-arclength: a'(s) != 0 not established")
    cert.config_echo = dict(echo or {})
    return cert
