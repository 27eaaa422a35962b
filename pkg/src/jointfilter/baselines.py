"""Classical resampling and joint filters used as references.

All window operations clamp coordinates at the image border. Images are
rank-3 ``(C, H, W)`` arrays; 2-D input is treated as a single channel.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError

LUMA = np.array([0.299, 0.587, 0.114])


def _rank3(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[None]
    if img.ndim != 3:
        raise ShapeError(f"expected (C, H, W) image, got {img.shape}")
    return img


def luminance(img):
    """Single-channel luminance of a 1- or 3-channel image."""
    img = _rank3(img)
    if img.shape[0] == 1:
        return img.copy()
    if img.shape[0] != 3:
        raise ShapeError(f"luminance needs 1 or 3 channels, got {img.shape[0]}")
    return np.tensordot(LUMA, img, axes=1)[None]


def nearest_downsample(img, scale):
    """Keep the top-left sample of every ``scale`` x ``scale`` block."""
    img = _rank3(img)
    scale = int(scale)
    if scale < 1:
        raise ValueError("scale must be >= 1")
    h, w = img.shape[1:]
    if h % scale or w % scale:
        raise ShapeError(f"image {h}x{w} is not divisible by scale {scale}")
    return img[:, ::scale, ::scale].copy()


def nearest_upsample(img, scale):
    """Replicate each sample into a ``scale`` x ``scale`` block."""
    img = _rank3(img)
    return img.repeat(scale, axis=1).repeat(scale, axis=2)


def cubic_kernel(x, a=-0.5):
    """Keys cubic convolution kernel."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def _cubic_matrix(n_in, n_out):
    """(n_out, n_in) interpolation matrix with edge clamping."""
    scale = n_out / n_in
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    base = np.floor(src).astype(int)
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for off in range(-1, 3):
        idx = base + off
        wts = cubic_kernel(src - idx)
        np.add.at(mat, (rows, np.clip(idx, 0, n_in - 1)), wts)
    return mat


def bicubic_resize(img, out_h, out_w):
    img = _rank3(img)
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    my = _cubic_matrix(img.shape[1], out_h)
    mx = _cubic_matrix(img.shape[2], out_w)
    return np.einsum("yi,cij,xj->cyx", my, img, mx)


def bicubic_upsample(img, scale):
    img = _rank3(img)
    return bicubic_resize(img, img.shape[1] * scale, img.shape[2] * scale)


@dataclass(frozen=True)
class JBUParams:
    sigma_spatial: float
    sigma_range: float = 0.1
    window_radius: int = 2

    def __post_init__(self):
        if self.sigma_spatial <= 0 or self.sigma_range <= 0 or self.window_radius <= 0:
            raise ValueError("JBU parameters must be positive")

    @classmethod
    def for_scale(cls, scale):
        return cls(sigma_spatial=0.5 * scale)


@dataclass(frozen=True)
class GFParams:
    radius: int
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def for_scale(cls, scale):
        return cls(radius=int(scale))


def _scale_of(low_shape, high_shape):
    (lh, lw), (hh, hw) = low_shape, high_shape
    if hh % lh or hw % lw or hh // lh != hw // lw:
        raise ShapeError(f"guidance {hh}x{hw} is not an integer multiple of {lh}x{lw}")
    return hh // lh


def joint_bilateral_upsample(low, guidance, params=None):
    """Upsample ``low`` to the guidance grid with spatial x range weights.

    Low-res sample ``p`` sits at high-res position ``p * scale`` (the
    nearest-downsampling convention). For each output pixel ``q`` the window
    covers low-res samples within ``window_radius`` of the block containing
    ``q``; out-of-range samples are edge-clamped.
    """
    low = _rank3(low)
    guidance = _rank3(guidance)
    s = _scale_of(low.shape[1:], guidance.shape[1:])
    p = params or JBUParams.for_scale(s)
    lh, lw = low.shape[1:]
    hh, hw = guidance.shape[1:]
    qy, qx = np.mgrid[0:hh, 0:hw]
    cy, cx = qy // s, qx // s
    num = np.zeros((low.shape[0], hh, hw))
    den = np.zeros((hh, hw))
    r = p.window_radius
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            py, px = cy + dy, cx + dx
            spatial = ((qy - py * s) ** 2 + (qx - px * s) ** 2) / (2 * p.sigma_spatial ** 2)
            ly, lx = np.clip(py, 0, lh - 1), np.clip(px, 0, lw - 1)
            gy, gx = np.clip(py * s, 0, hh - 1), np.clip(px * s, 0, hw - 1)
            diff = guidance - guidance[:, gy, gx]
            rng = (diff ** 2).sum(axis=0) / (2 * p.sigma_range ** 2)
            wgt = np.exp(-spatial - rng)
            num += wgt * low[:, ly, lx]
            den += wgt
    return num / den


def box_sum(img, radius):
    """Sum over the (2r+1)^2 window around each pixel, edge-clamped."""
    img = np.asarray(img, dtype=np.float64)
    r = int(radius)
    padded = np.pad(img, [(0, 0)] * (img.ndim - 2) + [(r, r), (r, r)], mode="edge")
    c = padded.cumsum(axis=-2).cumsum(axis=-1)
    c = np.pad(c, [(0, 0)] * (img.ndim - 2) + [(1, 0), (1, 0)])
    k = 2 * r + 1
    return c[..., k:, k:] - c[..., :-k, k:] - c[..., k:, :-k] + c[..., :-k, :-k]


def box_mean(img, radius):
    return box_sum(img, radius) / (2 * radius + 1) ** 2


def guided_filter(target, guidance, params=None):
    """Single-channel guided filter with averaged linear coefficients."""
    t = _rank3(target)
    g = _rank3(guidance)
    if t.shape[0] != 1 or g.shape[0] != 1:
        raise ShapeError("guided_filter takes single-channel target and guidance")
    if t.shape != g.shape:
        raise ShapeError(f"target {t.shape} and guidance {g.shape} differ")
    p = params or GFParams(radius=4)
    r = p.radius
    mean_g = box_mean(g, r)
    mean_t = box_mean(t, r)
    cov = box_mean(g * t, r) - mean_g * mean_t
    var = box_mean(g * g, r) - mean_g * mean_g
    a = cov / (var + p.epsilon)
    b = mean_t - a * mean_g
    return box_mean(a, r) * g + box_mean(b, r)


def guided_upsample(low, guidance, params=None):
    """Bicubic-upsample ``low`` then guided-filter it against guidance luminance."""
    low = _rank3(low)
    guidance = _rank3(guidance)
    s = _scale_of(low.shape[1:], guidance.shape[1:])
    up = bicubic_upsample(low, s)
    lum = luminance(guidance)
    p = params or GFParams.for_scale(s)
    return np.concatenate([guided_filter(up[c:c + 1], lum, p) for c in range(up.shape[0])])
