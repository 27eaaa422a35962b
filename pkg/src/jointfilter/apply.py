"""Inference wrappers: joint filtering, upsampling, denoising, texture removal, feature maps."""

import numpy as np

from . import baselines, net
from .tensor import ShapeError

FIXED = "fixed"
ROLLING = "rolling"


def _prepare_guidance(model, guidance):
    g = np.asarray(guidance)
    if g.ndim == 2:
        g = g[None]
    if g.ndim != 3 or g.shape[0] not in (1, 3):
        raise ShapeError(f"guidance must have 1 or 3 channels, got shape {g.shape}")
    want = model.config.guidance_channels
    if g.shape[0] == 1 and want == 3:
        g = np.repeat(g, 3, axis=0)
    elif g.shape[0] != want:
        raise ShapeError(f"model expects {want}-channel guidance, got {g.shape[0]}")
    return g


def joint_filter(model, target, guidance):
    """Filter every channel of ``target`` independently against ``guidance``.

    Single-channel guidance is replicated to three channels.
    """
    t = np.asarray(target)
    if t.ndim == 2:
        t = t[None]
    if t.ndim != 3:
        raise ShapeError(f"target must be (C, H, W), got {t.shape}")
    g = _prepare_guidance(model, guidance)
    if t.shape[1:] != g.shape[1:]:
        raise ShapeError(f"target {t.shape[1:]} and guidance {g.shape[1:]} differ in size")
    if model.config.target_channels != 1:
        raise ShapeError("joint_filter processes one target channel per pass; "
                         f"model has target_channels={model.config.target_channels}")
    c = t.shape[0]
    out, _ = net.forward(model, t[:, None], np.broadcast_to(g, (c,) + g.shape))
    return out[:, 0]


def upsample(model, low_target, guidance, scale):
    """Bicubic-resize ``low_target`` to the guidance grid, then joint-filter."""
    low = np.asarray(low_target)
    if low.ndim == 2:
        low = low[None]
    g = np.asarray(guidance)
    gh, gw = g.shape[-2:]
    if (low.shape[1] * scale, low.shape[2] * scale) != (gh, gw):
        raise ShapeError(f"guidance {gh}x{gw} is not {scale}x the target {low.shape[1]}x{low.shape[2]}")
    up = baselines.bicubic_resize(low, gh, gw)
    return joint_filter(model, up, g)


def denoise(model, noisy, guidance):
    noisy = np.asarray(noisy)
    if noisy.shape[-2:] != np.shape(guidance)[-2:]:
        raise ShapeError(f"noisy {noisy.shape[-2:]} and guidance {np.shape(guidance)[-2:]} differ in size")
    return joint_filter(model, noisy, guidance)


def texture_separate(model, image, iterations, guidance_mode=FIXED, guidance=None):
    """Iterate the filter with the image as its own guidance.

    Each pass filters the previous output. With ``fixed`` guidance every pass
    is guided by the luminance of the original image (or by ``guidance``,
    which lets a run be continued); with ``rolling`` it is guided by the
    luminance of the previous output.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if guidance_mode not in (FIXED, ROLLING):
        raise ValueError(f"guidance_mode must be {FIXED!r} or {ROLLING!r}")
    x = np.asarray(image)
    if x.ndim == 2:
        x = x[None]
    guide = baselines.luminance(x if guidance is None else guidance)
    for _ in range(iterations):
        if guidance_mode == ROLLING:
            guide = baselines.luminance(x)
        x = joint_filter(model, x, guide)
    return x


def _normalize(m):
    lo, hi = float(m.min()), float(m.max())
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def dump_features(model, target, guidance, branch, layer):
    """Min-max normalized activations of ``layer`` (1-based) in branch ``t``, ``g`` or ``f``.

    Hidden layers are taken after the ReLU; a branch's last layer has none.
    """
    if branch not in net.BRANCHES:
        raise ValueError(f"branch must be one of {net.BRANCHES}, got {branch!r}")
    layers = model.branch(branch)
    if not 1 <= layer <= len(layers):
        raise ValueError(f"layer {layer} out of range 1..{len(layers)} for branch {branch!r}")
    t = np.asarray(target)
    if t.ndim == 2:
        t = t[None]
    g = _prepare_guidance(model, guidance)
    _, trace = net.forward(model, t, g, keep_trace=True)
    z = trace.preacts[branch][layer - 1][0]
    if layer < len(layers):
        z = np.maximum(z, 0)
    return [_normalize(m) for m in z]
