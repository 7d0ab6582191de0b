"""Dense optical flow via polynomial expansion with coarse-to-fine refinement.

Each image neighborhood is approximated by a quadratic
``f(u) = u' A u + b' u + c`` fitted under a separable Gaussian weighting
(the applicability).  For a pair of images the local displacement ``d``
satisfies ``A_avg d = db`` where ``A_avg`` averages the two expansions and
``db`` is half the difference of the linear coefficients; the solve is
stabilized by Gaussian-averaging the normal equations over ``window_size``
and iterated, warping the second expansion by the current displacement.
A pyramid of downscaled images extends the capture range.

Conventions: pixel centers sit at integer coordinates, x is the column
axis, y the row axis, and flow (u, v) maps a point p in the first frame to
p + (u, v) in the second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

try:
    import numba
    from numba import njit, prange
    numba.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    _HAVE_NUMBA = False

RCOND_INVALID = 1e-6  # normal-matrix reciprocal condition number below this marks a pixel invalid
_MIN_LEVEL_SIZE = 16


@dataclass(frozen=True)
class FlowParams:
    """Knobs of the expansion/refinement algorithm.

    ``poly_n`` is the expansion neighborhood radius (the kernel spans
    2*poly_n + 1 samples).
    """

    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.poly_n < 1:
            raise ValueError("poly_n must be >= 1")
        if self.poly_sigma <= 0:
            raise ValueError("poly_sigma must be positive")


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement with a validity mask.

    ``u``/``v`` hold the x and y displacement in pixels per frame pair;
    ``valid`` is False where the local normal matrix was too close to
    singular (textureless or aperture-limited neighborhoods).  ``dt`` is
    the time between the source frames in seconds.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray
    dt: float

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.shape != self.valid.shape:
            raise ValueError("flow component shapes disagree")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if np.any(~np.isfinite(self.u[self.valid])) or np.any(~np.isfinite(self.v[self.valid])):
            raise ValueError("non-finite displacement marked valid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


@dataclass(frozen=True)
class PolyExpansion:
    """Per-pixel quadratic coefficients.

    The fitted surface is ``axx*x^2 + ayy*y^2 + axy*x*y + bx*x + by*y + c``
    in local coordinates, i.e. A = [[axx, axy/2], [axy/2, ayy]] and
    b = (bx, by).
    """

    axx: np.ndarray
    ayy: np.ndarray
    axy: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    c: np.ndarray


def _applicability_kernels(n: int, sigma: float):
    k = np.arange(-n, n + 1, dtype=np.float64)
    g = np.exp(-(k * k) / (2.0 * sigma * sigma))
    g /= g.sum()
    return g, k * g, k * k * g


def _gram_inverse_entries(g: np.ndarray, n: int):
    """Invert the 6x6 Gram matrix of the basis (1, x, y, x^2, y^2, xy).

    The separable Gaussian applicability makes the inverse sparse; only
    five distinct entries are needed to read off all coefficients.
    """
    k = np.arange(-n, n + 1, dtype=np.float64)
    m2 = float(np.sum(g * k * k))
    m4 = float(np.sum(g * k ** 4))
    G = np.zeros((6, 6))
    G[0, 0] = 1.0
    G[1, 1] = G[2, 2] = m2
    G[3, 3] = G[4, 4] = m4
    G[5, 5] = m2 * m2
    G[0, 3] = G[3, 0] = G[0, 4] = G[4, 0] = m2
    G[3, 4] = G[4, 3] = m2 * m2
    inv = np.linalg.inv(G)
    return inv[0, 0], inv[0, 3], inv[1, 1], inv[3, 3], inv[5, 5]


def polynomial_expansion(image: np.ndarray, poly_n: int, poly_sigma: float) -> PolyExpansion:
    """Weighted least-squares quadratic fit around every pixel.

    Borders use replicated (clamped) samples.  The fit is exact for inputs
    that are polynomials of degree <= 2, e.g. a constant image yields
    A = 0, b = 0 and c equal to the constant.  Float inputs keep their
    dtype; everything else is promoted to float64.
    """
    img = np.asarray(image)
    if img.dtype not in (np.float32, np.float64):
        img = img.astype(np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expansion needs a non-empty 2-d image")
    g, xg, xxg = (k.astype(img.dtype) for k in _applicability_kernels(poly_n, poly_sigma))
    ig00, ig03, ig11, ig33, ig55 = _gram_inverse_entries(g.astype(np.float64), poly_n)

    # Vertical moment pass (y axis), then horizontal (x axis); correlate1d
    # applies kernels unflipped so the odd kernel measures +offset moments.
    r0 = ndimage.correlate1d(img, g, axis=0, mode="nearest")
    r1 = ndimage.correlate1d(img, xg, axis=0, mode="nearest")
    r2 = ndimage.correlate1d(img, xxg, axis=0, mode="nearest")

    b1 = ndimage.correlate1d(r0, g, axis=1, mode="nearest")
    b2 = ndimage.correlate1d(r0, xg, axis=1, mode="nearest")
    b3 = ndimage.correlate1d(r1, g, axis=1, mode="nearest")
    b4 = ndimage.correlate1d(r0, xxg, axis=1, mode="nearest")
    b5 = ndimage.correlate1d(r2, g, axis=1, mode="nearest")
    b6 = ndimage.correlate1d(r1, xg, axis=1, mode="nearest")

    dt = img.dtype.type
    return PolyExpansion(
        axx=dt(ig03) * b1 + dt(ig33) * b4,
        ayy=dt(ig03) * b1 + dt(ig33) * b5,
        axy=dt(ig55) * b6,
        bx=dt(ig11) * b2,
        by=dt(ig11) * b3,
        c=dt(ig00) * b1 + dt(ig03) * (b4 + b5),
    )


def _resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Separable bilinear resample with half-pixel alignment and edge clamp."""
    h0, w0 = img.shape

    def axis_coords(n_out, n_in):
        c = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        np.clip(c, 0.0, n_in - 1.0, out=c)
        i0 = np.floor(c).astype(np.intp)
        i0 = np.minimum(i0, n_in - 2) if n_in > 1 else np.zeros_like(i0)
        return i0, (c - i0).astype(img.dtype)

    yi, yf = axis_coords(height, h0)
    xi, xf = axis_coords(width, w0)
    if w0 > 1:
        rows = img[:, xi] * (1.0 - xf) + img[:, xi + 1] * xf
    else:
        rows = img[:, xi]
    if h0 > 1:
        out = rows[yi, :] * (1.0 - yf)[:, None] + rows[yi + 1, :] * yf[:, None]
    else:
        out = rows[yi, :]
    return out


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    k = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return g / g.sum()


def _smooth(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    tmp = ndimage.correlate1d(channel, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(tmp, kernel, axis=1, mode="nearest")


_BORDER_RAMP = 5


def _border_weights(height: int, width: int, dtype=np.float32) -> np.ndarray:
    y = np.minimum(np.arange(height), np.arange(height)[::-1])
    x = np.minimum(np.arange(width), np.arange(width)[::-1])
    wy = np.minimum(y, _BORDER_RAMP) / _BORDER_RAMP
    wx = np.minimum(x, _BORDER_RAMP) / _BORDER_RAMP
    return (wy[:, None] * wx[None, :]).astype(dtype)


def _stack_expansion(e: PolyExpansion) -> np.ndarray:
    """Channels [axx, ayy, a_off, bx, by] with a_off the A off-diagonal."""
    return np.stack([e.axx, e.ayy, 0.5 * e.axy, e.bx, e.by]).astype(np.float32)


def _normal_equations_numpy(s0: np.ndarray, s1: np.ndarray, u: np.ndarray,
                            v: np.ndarray, border: np.ndarray, out: np.ndarray):
    _, h, w = s0.shape
    xs = np.arange(w, dtype=np.float32)[None, :] + u
    ys = np.arange(h, dtype=np.float32)[:, None] + v
    np.clip(xs, 0.0, w - 1.0, out=xs)
    np.clip(ys, 0.0, h - 1.0, out=ys)
    x0 = np.minimum(xs.astype(np.intp), w - 2)
    y0 = np.minimum(ys.astype(np.intp), h - 2)
    fx = (xs - x0).ravel()
    fy = (ys - y0).ravel()
    idx = (y0 * w + x0).ravel()

    flat1 = s1.reshape(5, -1)
    w00 = (1 - fx) * (1 - fy)
    w01 = fx * (1 - fy)
    w10 = (1 - fx) * fy
    w11 = fx * fy
    s1w = (flat1[:, idx] * w00 + flat1[:, idx + 1] * w01
           + flat1[:, idx + w] * w10 + flat1[:, idx + w + 1] * w11).reshape(s0.shape)

    axx = 0.5 * (s0[0] + s1w[0])
    ayy = 0.5 * (s0[1] + s1w[1])
    aoff = 0.5 * (s0[2] + s1w[2])
    dbx = 0.5 * (s0[3] - s1w[3]) + axx * u + aoff * v
    dby = 0.5 * (s0[4] - s1w[4]) + aoff * u + ayy * v

    axx = axx * border
    ayy = ayy * border
    aoff = aoff * border
    dbx = dbx * border
    dby = dby * border

    out[0] = axx * axx + aoff * aoff
    out[1] = (axx + ayy) * aoff
    out[2] = ayy * ayy + aoff * aoff
    out[3] = axx * dbx + aoff * dby
    out[4] = aoff * dbx + ayy * dby


if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _normal_equations_jit(s0, s1, u, v, border, out):  # pragma: no cover - exercised via wrapper
        _, h, w = s0.shape
        for y in prange(h):
            for x in range(w):
                xs = x + u[y, x]
                if xs < 0.0:
                    xs = 0.0
                elif xs > w - 1.0:
                    xs = np.float32(w - 1.0)
                ys = y + v[y, x]
                if ys < 0.0:
                    ys = 0.0
                elif ys > h - 1.0:
                    ys = np.float32(h - 1.0)
                x0 = min(int(xs), w - 2)
                y0 = min(int(ys), h - 2)
                fx = xs - x0
                fy = ys - y0
                w00 = (1.0 - fx) * (1.0 - fy)
                w01 = fx * (1.0 - fy)
                w10 = (1.0 - fx) * fy
                w11 = fx * fy

                sw = border[y, x]
                axx = np.float32(0.5) * (s0[0, y, x]
                                         + (w00 * s1[0, y0, x0] + w01 * s1[0, y0, x0 + 1]
                                            + w10 * s1[0, y0 + 1, x0] + w11 * s1[0, y0 + 1, x0 + 1]))
                ayy = np.float32(0.5) * (s0[1, y, x]
                                         + (w00 * s1[1, y0, x0] + w01 * s1[1, y0, x0 + 1]
                                            + w10 * s1[1, y0 + 1, x0] + w11 * s1[1, y0 + 1, x0 + 1]))
                aoff = np.float32(0.5) * (s0[2, y, x]
                                          + (w00 * s1[2, y0, x0] + w01 * s1[2, y0, x0 + 1]
                                             + w10 * s1[2, y0 + 1, x0] + w11 * s1[2, y0 + 1, x0 + 1]))
                dbx = np.float32(0.5) * (s0[3, y, x]
                                         - (w00 * s1[3, y0, x0] + w01 * s1[3, y0, x0 + 1]
                                            + w10 * s1[3, y0 + 1, x0] + w11 * s1[3, y0 + 1, x0 + 1]))
                dby = np.float32(0.5) * (s0[4, y, x]
                                         - (w00 * s1[4, y0, x0] + w01 * s1[4, y0, x0 + 1]
                                            + w10 * s1[4, y0 + 1, x0] + w11 * s1[4, y0 + 1, x0 + 1]))
                dbx = dbx + axx * u[y, x] + aoff * v[y, x]
                dby = dby + aoff * u[y, x] + ayy * v[y, x]

                axx *= sw
                ayy *= sw
                aoff *= sw
                dbx *= sw
                dby *= sw

                out[0, y, x] = axx * axx + aoff * aoff
                out[1, y, x] = (axx + ayy) * aoff
                out[2, y, x] = ayy * ayy + aoff * aoff
                out[3, y, x] = axx * dbx + aoff * dby
                out[4, y, x] = aoff * dbx + ayy * dby


def _normal_equations(s0: np.ndarray, s1: np.ndarray, u: np.ndarray,
                      v: np.ndarray, border: np.ndarray) -> np.ndarray:
    """Build per-pixel 2x2 normal equations G d = h for the displacement.

    The second expansion is sampled at the warped position p + (u, v) with
    bilinear interpolation (coordinates clamped to the frame), the two A
    matrices are averaged, and the current displacement is folded into the
    right-hand side so the solve yields the full displacement, not an
    increment.  Channels of the result: [G11, G12, G22, h1, h2].
    """
    out = np.empty_like(s0)
    if _HAVE_NUMBA:
        _normal_equations_jit(s0, s1, np.ascontiguousarray(u),
                              np.ascontiguousarray(v), border, out)
    else:
        _normal_equations_numpy(s0, s1, u, v, border, out)
    return out


def _solve_flow(m: np.ndarray):
    g11, g12, g22, h1, h2 = m
    det = g11 * g22 - g12 * g12
    # Relative regularizer: negligible where conditioned, keeps the solve
    # finite where the normal matrix degenerates.
    reg = (1e-5 * 0.5 * (g11 + g22)) ** 2 + np.float32(1e-35)
    inv = 1.0 / (det + reg)
    return (g22 * h1 - g12 * h2) * inv, (g11 * h2 - g12 * h1) * inv


def _rcond(g11, g12, g22):
    mean = 0.5 * (g11 + g22)
    radius = np.sqrt(np.maximum(0.25 * (g11 - g22) ** 2 + g12 * g12, 0.0))
    lmax = mean + radius
    with np.errstate(invalid="ignore", divide="ignore"):
        rc = np.where(lmax > 0, (mean - radius) / lmax, 0.0)
    return np.nan_to_num(rc, nan=0.0)


def compute_flow(prev: np.ndarray, next_: np.ndarray, params: FlowParams,
                 dt: float) -> FlowField:
    """Dense displacement field from ``prev`` to ``next_``.

    Deterministic: identical inputs and parameters give bit-identical
    fields.  Textureless regions are reported through the validity mask
    rather than an exception.
    """
    a = np.asarray(prev, dtype=np.float64)
    b = np.asarray(next_, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < 2:
        raise ValueError("flow needs 2-d frames at least 2 pixels on a side")
    if dt <= 0:
        raise ValueError("dt must be positive")

    a = a.astype(np.float32)
    b = b.astype(np.float32)
    h0, w0 = a.shape
    levels = 1
    scale = 1.0
    while levels < params.pyramid_levels:
        scale *= params.pyramid_scale
        if min(h0, w0) * scale < _MIN_LEVEL_SIZE:
            break
        levels += 1

    win_kernel = _gaussian_kernel(params.window_size,
                                  0.3 * (params.window_size // 2)).astype(np.float32)
    u = v = None
    m = None
    for k in range(levels - 1, -1, -1):
        scale = params.pyramid_scale ** k
        lh = max(2, int(round(h0 * scale)))
        lw = max(2, int(round(w0 * scale)))
        if k > 0:
            sigma = (1.0 / scale - 1.0) * 0.5
            size = max(3, int(round(sigma * 5)) | 1)
            blur = _gaussian_kernel(size, sigma).astype(np.float32)
            ia = _smooth(a, blur)
            ib = _smooth(b, blur)
        else:
            ia, ib = a, b
        ia = _resize_bilinear(ia, lh, lw)
        ib = _resize_bilinear(ib, lh, lw)

        if u is None:
            u = np.zeros((lh, lw), dtype=np.float32)
            v = np.zeros((lh, lw), dtype=np.float32)
        else:
            ph, pw = u.shape
            u = _resize_bilinear(u, lh, lw) * np.float32(lw / pw)
            v = _resize_bilinear(v, lh, lw) * np.float32(lh / ph)

        s0 = _stack_expansion(polynomial_expansion(ia, params.poly_n, params.poly_sigma))
        s1 = _stack_expansion(polynomial_expansion(ib, params.poly_n, params.poly_sigma))
        border = _border_weights(lh, lw)
        for _ in range(params.iterations):
            m = _normal_equations(s0, s1, u, v, border)
            m = ndimage.correlate1d(m, win_kernel, axis=1, mode="nearest")
            m = ndimage.correlate1d(m, win_kernel, axis=2, mode="nearest")
            u, v = _solve_flow(m)

    valid = _rcond(m[0], m[1], m[2]) >= RCOND_INVALID
    u = np.where(valid, u, np.float32(0.0)).astype(np.float64)
    v = np.where(valid, v, np.float32(0.0)).astype(np.float64)
    return FlowField(u=u, v=v, valid=valid, dt=float(dt))


def subsample_flow(field: FlowField, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Correspondences (p, q = p + flow) on a stride grid of valid pixels.

    Returns two (N, 2) arrays of (x, y) pixel-center coordinates, row-major
    over grid points whose mask is set.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    h, w = field.shape
    ys, xs = np.mgrid[0:h:stride, 0:w:stride]
    keep = field.valid[ys, xs]
    xs = xs[keep]
    ys = ys[keep]
    p = np.stack([xs, ys], axis=1).astype(np.float64)
    q = p + np.stack([field.u[ys, xs], field.v[ys, xs]], axis=1)
    return p, q
