"""Dense optical flow between consecutive frames.

The estimator follows the classic polynomial-expansion scheme: every pixel
neighbourhood is fitted with a quadratic f(x) ~ x'Ax + b'x + c under Gaussian
weighting, and the displacement relating the two fits is solved over a local
window, coarse-to-fine over an image pyramid.

Convention: the returned field is backward flow on the *current* frame's
grid. A pixel p of the current frame originates from p + (u(p), v(p)) in the
previous frame, which is exactly what gather-style warping needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import FlowField, Frame


@dataclass
class FlowParams:
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    negate: bool = False  # experimentation hook: flip the sign convention

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ValueError("pyramid_scale must be in (0, 1)")
        for name in ("window_size", "poly_n"):
            val = getattr(self, name)
            if val < 3 or val % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 3")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.poly_sigma <= 0.0:
            raise ValueError("poly_sigma must be positive")


def to_grayscale(frame: Frame) -> Frame:
    """BT.601 luma; single-channel input is returned unchanged."""
    if frame.channels == 1:
        return frame
    rgb = frame.data.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    gray = np.rint(luma).astype(np.uint8)
    return Frame(gray[:, :, None], index=frame.index)


def downscale_frame(frame: Frame, scale: float) -> Frame:
    """Area-averaged downsample by 1, 1/2 or 1/4."""
    if scale == 1.0:
        return frame
    if scale not in (0.5, 0.25):
        raise ValueError("scale must be one of 1, 1/2, 1/4")
    k = int(round(1.0 / scale))
    h = (frame.height // k) * k
    w = (frame.width // k) * k
    if h // k < 2 or w // k < 2:
        raise ValueError("downscaled frame would be smaller than 2x2")
    d = frame.data[:h, :w].astype(np.float64)
    d = d.reshape(h // k, k, w // k, k, frame.channels).mean(axis=(1, 3))
    return Frame(np.rint(d).astype(np.uint8), index=frame.index)


def _resize_bilinear(arr: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Separable bilinear resize with align-corners coordinate mapping."""
    src_h, src_w = arr.shape
    if (src_h, src_w) == (target_h, target_w):
        return arr.copy()

    def coords(target, source):
        if target == 1:
            return np.zeros(1), np.zeros(1, np.intp), np.zeros(1, np.intp)
        pos = np.arange(target) * ((source - 1) / (target - 1))
        lo = np.clip(np.floor(pos).astype(np.intp), 0, source - 1)
        hi = np.minimum(lo + 1, source - 1)
        return pos - lo, lo, hi

    fy, y0, y1 = coords(target_h, src_h)
    fx, x0, x1 = coords(target_w, src_w)
    rows = arr[y0] + fy[:, None] * (arr[y1] - arr[y0])
    return rows[:, x0] + fx[None, :] * (rows[:, x1] - rows[:, x0])


def resize_flow(flow: FlowField, target_h: int, target_w: int) -> FlowField:
    """Bilinearly resample the field and rescale magnitudes so displacements
    are expressed in target-grid pixels."""
    if target_h < 2 or target_w < 2:
        raise ValueError("target dimensions must be >= 2")
    u = _resize_bilinear(flow.u.astype(np.float64), target_h, target_w)
    v = _resize_bilinear(flow.v.astype(np.float64), target_h, target_w)
    u = u * target_w / flow.width
    v = v * target_h / flow.height
    return FlowField(u.astype(np.float32), v.astype(np.float32))


def mean_flow_magnitude(flow: FlowField) -> float:
    return float(np.mean(np.hypot(flow.u.astype(np.float64),
                                  flow.v.astype(np.float64))))


# ---------------------------------------------------------------------------
# Polynomial expansion

def polynomial_expansion(gray: Frame | np.ndarray, poly_n: int = 5,
                         poly_sigma: float = 1.1):
    """Per-pixel weighted least-squares quadratic fit.

    Returns (a11, a12, a22, b1, b2, c) arrays: f(p + (x, y)) is approximated
    by a11 x^2 + 2 a12 xy + a22 y^2 + b1 x + b2 y + c with Gaussian weights of
    std poly_sigma over a poly_n x poly_n neighbourhood.
    """
    if isinstance(gray, Frame):
        if gray.channels != 1:
            raise ValueError("expansion expects a single-channel frame")
        img = gray.data[:, :, 0].astype(np.float64)
    else:
        img = np.asarray(gray, np.float64)

    n2 = poly_n // 2
    off = np.arange(-n2, n2 + 1, dtype=np.float64)
    ax = np.exp(-off ** 2 / (2.0 * poly_sigma ** 2))

    # basis [1, x, y, x^2, y^2, xy]; every correlation kernel is separable
    kernels_1d = {"one": ax, "lin": off * ax, "sq": off ** 2 * ax}
    pairs = [("one", "one"), ("lin", "one"), ("one", "lin"),
             ("sq", "one"), ("one", "sq"), ("lin", "lin")]

    # metric G = sum_w a(w) b(w) b(w)^T over the window, constant per pixel
    wy, wx = np.meshgrid(off, off, indexing="ij")
    weight = np.exp(-(wx ** 2 + wy ** 2) / (2.0 * poly_sigma ** 2))
    basis = np.stack([np.ones_like(wx), wx, wy, wx ** 2, wy ** 2, wx * wy])
    flat = basis.reshape(6, -1)
    metric = (flat * weight.ravel()) @ flat.T
    metric_inv = np.linalg.inv(metric)

    proj = np.empty((6,) + img.shape)
    for k, (kx, ky) in enumerate(pairs):
        tmp = ndimage.correlate1d(img, kernels_1d[kx], axis=1, mode="nearest")
        proj[k] = ndimage.correlate1d(tmp, kernels_1d[ky], axis=0, mode="nearest")

    r = np.tensordot(metric_inv, proj, axes=1)
    c, b1, b2, a11, a22, axy = r
    return a11, axy / 2.0, a22, b1, b2, c


# ---------------------------------------------------------------------------
# Displacement estimation

def _pyramid(img: np.ndarray, levels: int, scale: float):
    """Fine-to-coarse list of smoothed, shrunken copies."""
    sigma = 0.5 / scale
    pyr = [img]
    for _ in range(1, levels):
        prev = pyr[-1]
        h = max(int(round(prev.shape[0] * scale)), 4)
        w = max(int(round(prev.shape[1] * scale)), 4)
        if (h, w) == prev.shape:
            break
        smoothed = ndimage.gaussian_filter(prev, sigma, mode="nearest")
        pyr.append(_resize_bilinear(smoothed, h, w))
    return pyr


def _solve_level(expand_cur, expand_prev, u, v, params: FlowParams):
    a11c, a12c, a22c, b1c, b2c = expand_cur
    a11p, a12p, a22p, b1p, b2p = expand_prev
    h, w = a11c.shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    eps = 1e-9

    for _ in range(params.iterations):
        sx = np.clip(np.rint(xx + u), 0, w - 1).astype(np.intp)
        sy = np.clip(np.rint(yy + v), 0, h - 1).astype(np.intp)
        du = sx - xx
        dv = sy - yy

        a11 = 0.5 * (a11c + a11p[sy, sx])
        a12 = 0.5 * (a12c + a12p[sy, sx])
        a22 = 0.5 * (a22c + a22p[sy, sx])
        db1 = a11 * du + a12 * dv - 0.5 * (b1p[sy, sx] - b1c)
        db2 = a12 * du + a22 * dv - 0.5 * (b2p[sy, sx] - b2c)

        m11 = a11 * a11 + a12 * a12
        m12 = a12 * (a11 + a22)
        m22 = a12 * a12 + a22 * a22
        h1 = a11 * db1 + a12 * db2
        h2 = a12 * db1 + a22 * db2
        size = params.window_size
        m11, m12, m22, h1, h2 = (
            ndimage.uniform_filter(arr, size, mode="nearest")
            for arr in (m11, m12, m22, h1, h2))

        det = m11 * m22 - m12 * m12
        ok = np.abs(det) > eps
        safe = np.where(ok, det, 1.0)
        u = np.where(ok, (m22 * h1 - m12 * h2) / safe, u)
        v = np.where(ok, (m11 * h2 - m12 * h1) / safe, v)
    return u, v


def estimate_flow(prev: Frame, curr: Frame,
                  params: FlowParams | None = None) -> FlowField:
    """Backward flow on the current frame's grid (see module docstring)."""
    if params is None:
        params = FlowParams()
    if (prev.height, prev.width) != (curr.height, curr.width):
        raise ValueError("frames must share dimensions")

    prev_img = to_grayscale(prev).data[:, :, 0].astype(np.float64)
    curr_img = to_grayscale(curr).data[:, :, 0].astype(np.float64)

    # solve with image1 = current and image2 = previous so the displacement
    # points from the current grid into the previous frame
    pyr_cur = _pyramid(curr_img, params.pyramid_levels, params.pyramid_scale)
    pyr_prev = _pyramid(prev_img, params.pyramid_levels, params.pyramid_scale)

    u = v = None
    for level in range(len(pyr_cur) - 1, -1, -1):
        cur_l, prev_l = pyr_cur[level], pyr_prev[level]
        h, w = cur_l.shape
        if u is None:
            u = np.zeros((h, w))
            v = np.zeros((h, w))
        else:
            up = resize_flow(FlowField(u.astype(np.float32),
                                       v.astype(np.float32)), h, w)
            u = up.u.astype(np.float64)
            v = up.v.astype(np.float64)
        exp_cur = polynomial_expansion(cur_l, params.poly_n, params.poly_sigma)[:5]
        exp_prev = polynomial_expansion(prev_l, params.poly_n, params.poly_sigma)[:5]
        u, v = _solve_level(exp_cur, exp_prev, u, v, params)

    if params.negate:
        u, v = -u, -v
    return FlowField(u.astype(np.float32), v.astype(np.float32))
