"""Independent reference computations used by several test modules."""

import math

import numpy as np


def poly_values(coef: dict, e: int, j, k):
    k = np.asarray(k, dtype=float)
    out = np.zeros(np.broadcast(np.asarray(j), k).shape, dtype=complex)
    for p, c in coef.items():
        out = out + complex(c) * k ** p
    if e:
        out = out + 1j * np.asarray(j, dtype=float)
    return out


def _kpoly(coef: dict, pw: dict):
    """Real and imaginary parts of ``sum_p coef[p] k^p`` from precomputed powers."""
    re = np.zeros_like(pw[1])
    im = np.zeros_like(pw[1])
    for p, c in coef.items():
        c = complex(c)
        if c.real:
            re += c.real * pw[p]
        if c.imag:
            im += c.imag * pw[p]
    return re, im


def dense_tail_sup(num: dict, den: dict, e: int, K, space: str, limit: int = 10 ** 6) -> float:
    """Max of ``|num/den|`` on a dense scan of the tail up to index ``limit``.

    For real denominator coefficients the minimum of ``|i j + D(k)|`` over j
    sits at the smallest admissible ``|j|``, so the scan covers ``|k| > N``
    for ``|j| <= 3`` and ``|k| <= N`` for ``M < |j| <= limit``.
    """
    M, N = K
    k = np.arange(N + 1, limit + 1, dtype=float)
    k2 = k * k
    best = 0.0
    js = [0] if space == "1d" else [0, 1, 2, 3]
    for sgn in (1.0, -1.0):
        pw = {0: np.ones_like(k), 1: sgn * k, 2: k2, 4: k2 * k2}
        tr, ti = _kpoly(num, pw)
        top = np.hypot(tr, ti)
        dr, di = _kpoly(den, pw)
        for j in js:
            best = max(best, float(np.max(top / np.hypot(dr, di + e * j))))
    if space == "2d":
        jj = np.arange(M + 1, limit + 1, dtype=float)
        for kk in range(-N, N + 1):
            top = abs(complex(poly_values(num, 0, 0, kk)))
            if top == 0.0:
                continue
            D = complex(poly_values(den, 0, 0, kk))
            # |i j + D| = hypot(Re D, Im D + j): minimize the second leg densely
            for sgn in (1, -1):
                leg = float(np.min(np.abs(D.imag + e * sgn * jj)))
                best = max(best, top / math.hypot(D.real, leg))
    return best


def x_norm_flat(v, L) -> float:
    w = L.weights_up
    return max(np.max(np.abs(v[L.sc])), np.sum(w[L.ys] * np.abs(v[L.ys])), np.sum(w[L.zs] * np.abs(v[L.zs])))


def brute_block(B, L, i, j):
    """Supremum of block (i, j) over extremal unit vectors, 0-based blocks.

    Scalar inputs use the sup norm, whose extremal points for a nonnegative
    block include the all-ones vector; sequence inputs use weighted l1, whose
    extremal points are the weighted basis vectors.
    """
    blk = B[L.slot(i), :][:, L.slot(j)]
    w = L.weights_up
    if j == 0:
        if i == 0:
            return max(np.sum(np.abs(r)) for r in blk)
        return np.sum(w[L.slot(i)] @ np.abs(blk @ np.ones(3)))
    best = 0.0
    wc = w[L.slot(j)]
    for c in range(blk.shape[1]):
        col = blk[:, c] / wc[c]
        val = np.max(np.abs(col)) if i == 0 else np.sum(w[L.slot(i)] * np.abs(col))
        best = max(best, val)
    return best


def grid_product(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coefficients of the pointwise product of two centered Fourier arrays."""
    shape = tuple(a + b - 1 for a, b in zip(u.shape, v.shape))
    n = tuple(2 * s for s in shape)

    def idx(sh):
        return tuple(np.arange(-(m // 2), m // 2 + 1) % nn for m, nn in zip(sh, n))

    def to_grid(c):
        buf = np.zeros(n, dtype=complex)
        buf[np.ix_(*idx(c.shape))] = c
        return np.fft.ifftn(buf) * np.prod(n)

    w = np.fft.fftn(to_grid(u) * to_grid(v)) / np.prod(n)
    return w[np.ix_(*idx(shape))]


def pad(c: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    sl = tuple(slice((s - m) // 2, (s - m) // 2 + m) for s, m in zip(shape, c.shape))
    out[sl] = c
    return out


def pde_F1(lam2, y):
    """Spatial profile residual: lam2 u'''' + u'' + (u^2)_x, as coefficients."""
    sq = grid_product(y, y)
    k = np.arange(-(len(sq) // 2), len(sq) // 2 + 1)
    yy = pad(y, sq.shape)
    return lam2 * k ** 4 * yy - k ** 2 * yy - 1j * k * sq


def pde_F2(lam1, lam2, a, y, z):
    """Blow-up residual: z_t + lam1 (lam2 z'''' + z'' + (2 y z + a z^2)_x), as coefficients."""
    zz = grid_product(z, z)
    shape = zz.shape
    yz = pad(grid_product(y[None, :], z), shape)
    zp = pad(z, shape)
    j = np.arange(-(shape[0] // 2), shape[0] // 2 + 1)[:, None]
    k = np.arange(-(shape[1] // 2), shape[1] // 2 + 1)[None, :]
    return (1j * j * zp + lam1 * lam2 * k ** 4 * zp - lam1 * k ** 2 * zp
            - lam1 * 1j * k * (2 * yz + a * zz))
