"""Weighted l1 sequence spaces over Z and Z^2 and the product space X.

Coefficient arrays are dense and centered: a :class:`Seq1D` with support
radius ``N`` stores ``u_{-N..N}`` at positions ``0..2N``; a :class:`Seq2D` with
radii ``(M, N)`` stores ``u_{jk}`` at ``[j + M, k + N]``.  Coefficients are
:class:`~kshopf.ball.Ball` enclosures.

X = C^3 x l1_{nu2} x l1_{nu1,nu2} holds ``(lambda1, lambda2, a, y, z)`` with the
max product norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ball import Ball, U, convolve, pad_center, sum_up, up, weight_table
from .interval import ComplexInterval, ScalarInterval


@dataclass(frozen=True)
class Weights:
    nu1: float = 1.05
    nu2: float = 1.05

    def __post_init__(self):
        if not (self.nu1 >= 1.0 and self.nu2 >= 1.0):
            raise ValueError("weights must be >= 1")


def weights_1d(nu: float, N: int, upper: bool = True) -> np.ndarray:
    t = weight_table(nu, N, upper)
    return t[np.abs(np.arange(-N, N + 1))]


def weights_2d(nu1: float, nu2: float, M: int, N: int, upper: bool = True) -> np.ndarray:
    w = np.outer(weights_1d(nu1, M, upper), weights_1d(nu2, N, upper))
    return np.nextafter(w, np.inf if upper else -np.inf)


def _radius(n: int) -> int:
    if n % 2 != 1:
        raise ValueError("centered arrays must have odd length")
    return n // 2


class Seq1D:
    """Finitely supported element of l1_{nu2}."""

    __slots__ = ("coef", "nu2")

    def __init__(self, coef, nu2: float = 1.05):
        coef = Ball.coerce(coef)
        if coef.ndim != 1:
            raise ValueError("Seq1D needs a 1-d array")
        _radius(coef.shape[0])
        self.coef = coef
        self.nu2 = float(nu2)

    @classmethod
    def zeros(cls, N: int, nu2: float = 1.05) -> "Seq1D":
        return cls(Ball.zeros(2 * N + 1), nu2)

    @classmethod
    def delta(cls, k: int, N: int | None = None, nu2: float = 1.05, value=1.0) -> "Seq1D":
        N = abs(k) if N is None else N
        m = np.zeros(2 * N + 1, dtype=complex)
        m[k + N] = value
        return cls(m, nu2)

    @property
    def N(self) -> int:
        return self.coef.shape[0] // 2

    def __getitem__(self, k: int) -> complex:
        return self.coef.mid[k + self.N] if abs(k) <= self.N else 0j

    def padded(self, N: int) -> "Seq1D":
        return Seq1D(pad_center(self.coef, (2 * N + 1,)), self.nu2)

    def __add__(self, other: "Seq1D") -> "Seq1D":
        n = max(self.N, other.N)
        return Seq1D(self.padded(n).coef + other.padded(n).coef, self.nu2)

    def __sub__(self, other: "Seq1D") -> "Seq1D":
        n = max(self.N, other.N)
        return Seq1D(self.padded(n).coef - other.padded(n).coef, self.nu2)

    def __neg__(self) -> "Seq1D":
        return Seq1D(-self.coef, self.nu2)

    def scale(self, c) -> "Seq1D":
        return Seq1D(self.coef * c, self.nu2)

    def __repr__(self) -> str:
        return f"Seq1D(N={self.N}, nu2={self.nu2})"


class Seq2D:
    """Finitely supported element of l1_{nu1,nu2}."""

    __slots__ = ("coef", "nu1", "nu2")

    def __init__(self, coef, nu1: float = 1.05, nu2: float = 1.05):
        coef = Ball.coerce(coef)
        if coef.ndim != 2:
            raise ValueError("Seq2D needs a 2-d array")
        _radius(coef.shape[0])
        _radius(coef.shape[1])
        self.coef = coef
        self.nu1 = float(nu1)
        self.nu2 = float(nu2)

    @classmethod
    def zeros(cls, M: int, N: int, nu1: float = 1.05, nu2: float = 1.05) -> "Seq2D":
        return cls(Ball.zeros((2 * M + 1, 2 * N + 1)), nu1, nu2)

    @classmethod
    def delta(cls, j: int, k: int, M=None, N=None, nu1=1.05, nu2=1.05, value=1.0) -> "Seq2D":
        M = abs(j) if M is None else M
        N = abs(k) if N is None else N
        m = np.zeros((2 * M + 1, 2 * N + 1), dtype=complex)
        m[j + M, k + N] = value
        return cls(m, nu1, nu2)

    @property
    def M(self) -> int:
        return self.coef.shape[0] // 2

    @property
    def N(self) -> int:
        return self.coef.shape[1] // 2

    def __getitem__(self, jk) -> complex:
        j, k = jk
        if abs(j) <= self.M and abs(k) <= self.N:
            return self.coef.mid[j + self.M, k + self.N]
        return 0j

    def padded(self, M: int, N: int) -> "Seq2D":
        return Seq2D(pad_center(self.coef, (2 * M + 1, 2 * N + 1)), self.nu1, self.nu2)

    def __add__(self, other: "Seq2D") -> "Seq2D":
        m, n = max(self.M, other.M), max(self.N, other.N)
        return Seq2D(self.padded(m, n).coef + other.padded(m, n).coef, self.nu1, self.nu2)

    def __sub__(self, other: "Seq2D") -> "Seq2D":
        m, n = max(self.M, other.M), max(self.N, other.N)
        return Seq2D(self.padded(m, n).coef - other.padded(m, n).coef, self.nu1, self.nu2)

    def __neg__(self) -> "Seq2D":
        return Seq2D(-self.coef, self.nu1, self.nu2)

    def scale(self, c) -> "Seq2D":
        return Seq2D(self.coef * c, self.nu1, self.nu2)

    def __repr__(self) -> str:
        return f"Seq2D(M={self.M}, N={self.N}, nu=({self.nu1}, {self.nu2}))"


# norms ---------------------------------------------------------------

def _weighted_norm(coef: Ball, w_up: np.ndarray, w_lo: np.ndarray) -> ScalarInterval:
    hi = float(sum_up(up(coef.absup() * w_up, 2)))
    lo_terms = coef.abslo() * w_lo * (1 - 2 * U)
    lo = float(np.sum(lo_terms) * (1 - 2 * (coef.size + 2) * U))
    return ScalarInterval(max(lo, 0.0), hi)


def norm1d(u: Seq1D) -> ScalarInterval:
    """Enclosure of ``sum_k nu2^|k| |u_k|`` (the upper end is what bounds use)."""
    return _weighted_norm(u.coef, weights_1d(u.nu2, u.N), weights_1d(u.nu2, u.N, False))


def norm2d(u: Seq2D) -> ScalarInterval:
    return _weighted_norm(u.coef, weights_2d(u.nu1, u.nu2, u.M, u.N),
                          weights_2d(u.nu1, u.nu2, u.M, u.N, False))


def abs_norm1d(a: np.ndarray, nu2: float) -> float:
    """Upper bound on the weighted norm of a nonnegative centered array."""
    N = _radius(a.shape[0])
    return float(sum_up(up(a * weights_1d(nu2, N), 2)))


def abs_norm2d(a: np.ndarray, nu1: float, nu2: float) -> float:
    M, N = _radius(a.shape[0]), _radius(a.shape[1])
    return float(sum_up(up(a * weights_2d(nu1, nu2, M, N), 2)))


# convolution and embedding --------------------------------------------

def conv1d(u: Seq1D, v: Seq1D) -> Seq1D:
    """Convolution; the support radius of the result is ``N_u + N_v``."""
    return Seq1D(convolve(u.coef, v.coef), u.nu2)


def conv2d(u, v) -> Seq2D:
    """Two-dimensional convolution; a Seq1D operand is embedded first."""
    if isinstance(u, Seq1D):
        u = embed_ell(u, v.nu1)
    if isinstance(v, Seq1D):
        v = embed_ell(v, u.nu1)
    return Seq2D(convolve(u.coef, v.coef), u.nu1, u.nu2)


def embed_ell(y: Seq1D, nu1: float = 1.05) -> Seq2D:
    """Place ``y`` on the row ``j = 0`` of a 2-d sequence."""
    return Seq2D(y.coef.reshape(1, -1), nu1, y.nu2)


# the product space ------------------------------------------------------

def _scalar(x) -> Ball:
    b = Ball.coerce(x)
    if b.size != 1:
        raise ValueError("scalar component expected")
    return b.reshape(())


class XVector:
    """Element ``(lambda1, lambda2, a, y, z)`` of X."""

    __slots__ = ("lambda1", "lambda2", "a", "y", "z")

    def __init__(self, lambda1, lambda2, a, y: Seq1D, z: Seq2D):
        self.lambda1 = _scalar(lambda1)
        self.lambda2 = _scalar(lambda2)
        self.a = _scalar(a)
        self.y = y
        self.z = z

    @classmethod
    def zeros(cls, M: int, N: int, nu1: float = 1.05, nu2: float = 1.05) -> "XVector":
        return cls(0.0, 0.0, 0.0, Seq1D.zeros(N, nu2), Seq2D.zeros(M, N, nu1, nu2))

    @property
    def nu1(self) -> float:
        return self.z.nu1

    @property
    def nu2(self) -> float:
        return self.z.nu2

    @property
    def K(self) -> tuple[int, int]:
        return (self.z.M, max(self.z.N, self.y.N))

    def scalars(self) -> Ball:
        return Ball(np.array([self.lambda1.mid, self.lambda2.mid, self.a.mid]),
                    np.array([self.lambda1.rad, self.lambda2.rad, self.a.rad], dtype=float))

    def lambda1_interval(self) -> ComplexInterval:
        return self.lambda1.to_interval()

    def lambda2_interval(self) -> ComplexInterval:
        return self.lambda2.to_interval()

    def a_interval(self) -> ComplexInterval:
        return self.a.to_interval()

    def padded(self, M: int, N: int) -> "XVector":
        return XVector(self.lambda1, self.lambda2, self.a, self.y.padded(N), self.z.padded(M, N))

    def __add__(self, o: "XVector") -> "XVector":
        return XVector(self.lambda1 + o.lambda1, self.lambda2 + o.lambda2, self.a + o.a,
                       self.y + o.y, self.z + o.z)

    def __sub__(self, o: "XVector") -> "XVector":
        return XVector(self.lambda1 - o.lambda1, self.lambda2 - o.lambda2, self.a - o.a,
                       self.y - o.y, self.z - o.z)

    def __neg__(self) -> "XVector":
        return XVector(-self.lambda1, -self.lambda2, -self.a, -self.y, -self.z)

    def scale(self, c) -> "XVector":
        return XVector(self.lambda1 * c, self.lambda2 * c, self.a * c, self.y.scale(c), self.z.scale(c))

    def midpoint(self) -> "XVector":
        return XVector(self.lambda1.mid, self.lambda2.mid, self.a.mid,
                       Seq1D(self.y.coef.mid, self.nu2), Seq2D(self.z.coef.mid, self.nu1, self.nu2))

    def to_flat(self, layout: "Layout") -> Ball:
        p = self.padded(layout.M, layout.N)
        return Ball(np.concatenate([self.scalars().mid, p.y.coef.mid, p.z.coef.mid.ravel()]),
                    np.concatenate([self.scalars().rad, np.broadcast_to(p.y.coef.rad, p.y.coef.shape),
                                    np.broadcast_to(p.z.coef.rad, p.z.coef.shape).ravel()]))

    @classmethod
    def from_flat(cls, vec, layout: "Layout") -> "XVector":
        vec = Ball.coerce(vec)
        ny = 2 * layout.N + 1
        y = Seq1D(vec[3:3 + ny], layout.nu2)
        z = Seq2D(vec[3 + ny:].reshape(2 * layout.M + 1, ny), layout.nu1, layout.nu2)
        return cls(vec[0], vec[1], vec[2], y, z)

    def __repr__(self) -> str:
        return (f"XVector(lambda1={complex(self.lambda1.mid):.6g}, lambda2={complex(self.lambda2.mid):.6g}, "
                f"a={complex(self.a.mid):.3g}, y={self.y!r}, z={self.z!r})")


def project(x: XVector, K) -> XVector:
    """Keep only modes with ``|j| <= M`` and ``|k| <= N``; same storage size."""
    M, N = K
    y = x.y.coef.copy()
    ky = np.arange(-x.y.N, x.y.N + 1)
    y.mid[np.abs(ky) > N] = 0
    y.rad = np.where(np.abs(ky) > N, 0.0, y.rad)
    z = x.z.coef.copy()
    jj, kk = np.meshgrid(np.arange(-x.z.M, x.z.M + 1), np.arange(-x.z.N, x.z.N + 1), indexing="ij")
    out = (np.abs(jj) > M) | (np.abs(kk) > N)
    z.mid[out] = 0
    z.rad = np.where(out, 0.0, z.rad)
    return XVector(x.lambda1, x.lambda2, x.a, Seq1D(y, x.nu2), Seq2D(z, x.nu1, x.nu2))


def tail_project(x: XVector, K) -> XVector:
    """Complement of :func:`project`: scalars and in-range modes set to 0."""
    M, N = K
    oy = np.abs(np.arange(-x.y.N, x.y.N + 1)) > N
    y = Ball(np.where(oy, x.y.coef.mid, 0), np.where(oy, x.y.coef.rad, 0.0))
    jj, kk = np.meshgrid(np.arange(-x.z.M, x.z.M + 1), np.arange(-x.z.N, x.z.N + 1), indexing="ij")
    out = (np.abs(jj) > M) | (np.abs(kk) > N)
    z = Ball(np.where(out, x.z.coef.mid, 0), np.where(out, x.z.coef.rad, 0.0))
    return XVector(0.0, 0.0, 0.0, Seq1D(y, x.nu2), Seq2D(z, x.nu1, x.nu2))


def conjugate(x: XVector) -> XVector:
    """Index-reversing complex conjugation ``u*_k = conj(u_{-k})``."""
    return XVector(x.lambda1.conj(), x.lambda2.conj(), x.a.conj(),
                   Seq1D(x.y.coef[::-1].conj(), x.nu2),
                   Seq2D(x.z.coef[::-1, ::-1].conj(), x.nu1, x.nu2))


def symmetrize(x: XVector) -> XVector:
    """Return ``(x + x*)/2``; for thin input the output is exactly symmetric."""
    c = conjugate(x)
    if x.y.coef.is_thin and x.z.coef.is_thin and x.scalars().is_thin:
        def h(p, q):
            return 0.5 * (p + q)
        return XVector(h(x.lambda1.mid, c.lambda1.mid), h(x.lambda2.mid, c.lambda2.mid), h(x.a.mid, c.a.mid),
                       Seq1D(h(x.y.coef.mid, c.y.coef.mid), x.nu2),
                       Seq2D(h(x.z.coef.mid, c.z.coef.mid), x.nu1, x.nu2))
    return (x + c).scale(0.5)


def is_symmetric(x: XVector, tol: float = 0.0) -> bool:
    c = conjugate(x)
    parts = [(x.scalars(), c.scalars()), (x.y.coef, c.y.coef), (x.z.coef, c.z.coef)]
    return all(np.all(np.abs(p.mid - q.mid) <= p.rad + q.rad + tol) for p, q in parts)


def inner(x: XVector, w: XVector) -> ComplexInterval:
    """Bilinear pairing (no conjugation) over all components."""
    M, N = max(x.z.M, w.z.M), max(x.K[1], w.K[1])
    xp, wp = x.padded(M, N), w.padded(M, N)
    s = (x.scalars() * w.scalars()).sum()
    s = s + (xp.y.coef * wp.y.coef).sum() + (xp.z.coef * wp.z.coef).sum()
    return s.to_interval()


def component_norm(x: XVector) -> tuple[float, float, float]:
    """Upper bounds ``(max(|lambda1|, |lambda2|, |a|), ||y||, ||z||)``."""
    return (float(np.max(x.scalars().absup())), norm1d(x.y).hi, norm2d(x.z).hi)


def x_norm(x: XVector) -> float:
    return max(component_norm(x))


# serialization ----------------------------------------------------------

def seq_to_json(u) -> dict:
    if isinstance(u, Seq1D):
        m = u.coef.mid.reshape(1, -1)
        M, N, nu1 = 0, u.N, 1.0
    else:
        m = u.coef.mid
        M, N, nu1 = u.M, u.N, u.nu1
    return {"M": M, "N": N, "nu1": nu1, "nu2": u.nu2, "re": m.real.tolist(), "im": m.imag.tolist()}


def seq_from_json(d: dict, eps: float = 0.0, one_dimensional: bool | None = None):
    """Load midpoint coefficients and inflate each by ``eps``."""
    try:
        M, N = int(d["M"]), int(d["N"])
        m = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        nu1, nu2 = float(d["nu1"]), float(d["nu2"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed sequence record: {exc}") from exc
    if m.shape != (2 * M + 1, 2 * N + 1):
        raise ValueError("coefficient array shape does not match (M, N)")
    rad = np.full(m.shape, float(eps))
    if one_dimensional or (one_dimensional is None and M == 0 and m.shape[0] == 1 and d.get("dim") == 1):
        return Seq1D(Ball(m[0], rad[0]), nu2)
    return Seq2D(Ball(m, rad), nu1, nu2)


def xvector_to_json(x: XVector) -> dict:
    return {
        "lambda1": [float(x.lambda1.mid.real), float(x.lambda1.mid.imag)],
        "lambda2": [float(x.lambda2.mid.real), float(x.lambda2.mid.imag)],
        "a": [float(x.a.mid.real), float(x.a.mid.imag)],
        "y": dict(seq_to_json(x.y), dim=1),
        "z": seq_to_json(x.z),
    }


def xvector_from_json(d: dict, eps: float = 0.0) -> XVector:
    y = seq_from_json(d["y"], eps, one_dimensional=True)
    z = seq_from_json(d["z"], eps, one_dimensional=False)

    def sc(v):
        return Ball(complex(v[0], v[1]), eps)
    return XVector(sc(d["lambda1"]), sc(d["lambda2"]), sc(d["a"]), y, z)


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


# flat index layout -------------------------------------------------------

class Layout:
    """Flat ordering of truncated X: three scalars, y_{-N..N}, z row-major.

    The same ordering is used for residual vectors, where the three scalar
    slots carry the continuation equation and two scalar conditions and the
    y-slot at k=0 and the z-slot at (0,0) carry the remaining two.
    """

    def __init__(self, M: int, N: int, nu1: float = 1.05, nu2: float = 1.05):
        if M < 0 or N < 0:
            raise ValueError("truncation must be nonnegative")
        if not (nu1 >= 1.0 and nu2 >= 1.0):
            raise ValueError("weights must be >= 1")
        self.M, self.N = int(M), int(N)
        self.nu1, self.nu2 = float(nu1), float(nu2)
        self.ny = 2 * self.N + 1
        self.nz = (2 * self.M + 1) * self.ny
        self.dim = 3 + self.ny + self.nz
        self.sc = slice(0, 3)
        self.ys = slice(3, 3 + self.ny)
        self.zs = slice(3 + self.ny, self.dim)

    def __eq__(self, other) -> bool:
        return isinstance(other, Layout) and (self.M, self.N, self.nu1, self.nu2) == (
            other.M, other.N, other.nu1, other.nu2)

    def __hash__(self):
        return hash((self.M, self.N, self.nu1, self.nu2))

    def __repr__(self) -> str:
        return f"Layout(M={self.M}, N={self.N})"

    @property
    def K(self) -> tuple[int, int]:
        return (self.M, self.N)

    @cached_property
    def block(self) -> np.ndarray:
        b = np.zeros(self.dim, dtype=int)
        b[self.ys] = 1
        b[self.zs] = 2
        return b

    @cached_property
    def k(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.int64)
        out[self.ys] = np.arange(-self.N, self.N + 1)
        out[self.zs] = np.tile(np.arange(-self.N, self.N + 1), 2 * self.M + 1)
        return out

    @cached_property
    def j(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.int64)
        out[self.zs] = np.repeat(np.arange(-self.M, self.M + 1), self.ny)
        return out

    @cached_property
    def weights_up(self) -> np.ndarray:
        w = np.ones(self.dim)
        w[self.ys] = weights_1d(self.nu2, self.N)
        w[self.zs] = weights_2d(self.nu1, self.nu2, self.M, self.N).ravel()
        return w

    @cached_property
    def weights_lo(self) -> np.ndarray:
        w = np.ones(self.dim)
        w[self.ys] = weights_1d(self.nu2, self.N, False)
        w[self.zs] = weights_2d(self.nu1, self.nu2, self.M, self.N, False).ravel()
        return w

    @cached_property
    def inv_weights_up(self) -> np.ndarray:
        return up(1.0 / self.weights_lo, 2)

    @cached_property
    def reflect(self) -> np.ndarray:
        """Permutation sending each index to its negated index."""
        idx = np.arange(self.dim)
        out = idx.copy()
        out[self.ys] = idx[self.ys][::-1]
        out[self.zs] = idx[self.zs][::-1]
        return out

    @cached_property
    def y0(self) -> int:
        return 3 + self.N

    @cached_property
    def z00(self) -> int:
        return 3 + self.ny + self.M * self.ny + self.N

    def slot(self, i: int) -> slice:
        return (self.sc, self.ys, self.zs)[i]

    def index_in(self, big: "Layout") -> np.ndarray:
        """Positions of this layout's indices inside a larger layout."""
        if big.M < self.M or big.N < self.N:
            raise ValueError("target layout is smaller")
        out = np.empty(self.dim, dtype=np.int64)
        out[:3] = np.arange(3)
        out[self.ys] = big.y0 + np.arange(-self.N, self.N + 1)
        jj = self.j[self.zs]
        kk = self.k[self.zs]
        out[self.zs] = 3 + big.ny + (jj + big.M) * big.ny + (kk + big.N)
        return out

    def inside_mask(self, small: "Layout") -> np.ndarray:
        """Boolean mask of this layout's indices that belong to ``small``."""
        m = np.zeros(self.dim, dtype=bool)
        m[small.index_in(self)] = True
        return m

    def conjugate_vector(self, v: Ball) -> Ball:
        return v[self.reflect].conj()

    def conjugate_matrix(self, B: Ball, cols: "Layout | None" = None) -> Ball:
        """``B*_{r,c} = conj(B_{-r,-c})``."""
        cols = cols or self
        return B[np.ix_(self.reflect, cols.reflect)].conj()
