"""Synthetic depth / RGB scenes with co-located edges.

Depth is piecewise constant: a background plane plus random rectangles and
ellipses at random depths. The RGB guidance paints every region with its
own colour plus mild noise, so depth discontinuities coincide with colour
edges. Optional guidance-only stripes add texture that has no depth
counterpart.

The bundled toy set is a deliberately easy variant: its depth is the
luminance of its guidance, so a small network can fit it almost exactly.
"""

import os
from importlib import resources

import numpy as np


def make_scene(rng, height=64, width=64, shapes=(3, 7), texture=False, noise=0.02):
    """Return ``(depth (1, H, W), rgb (3, H, W))`` in [0, 1]."""
    yy, xx = np.mgrid[0:height, 0:width]
    labels = np.zeros((height, width), dtype=int)
    n = int(rng.integers(shapes[0], shapes[1] + 1))
    for k in range(1, n + 1):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry = rng.uniform(0.1, 0.4) * height
        rx = rng.uniform(0.1, 0.4) * width
        if rng.random() < 0.5:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        else:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        labels[mask] = k
    depths = rng.uniform(0.1, 0.95, size=n + 1)
    colours = rng.uniform(0.05, 0.95, size=(n + 1, 3))
    depth = depths[labels][None]
    rgb = colours[labels].transpose(2, 0, 1)
    if texture:
        period = rng.uniform(3, 8)
        angle = rng.uniform(0, np.pi)
        stripes = 0.1 * np.sign(np.sin((np.cos(angle) * xx + np.sin(angle) * yy) * 2 * np.pi / period))
        rgb = rgb + stripes[None]
    if noise:
        rgb = rgb + rng.normal(0, noise, size=rgb.shape)
    return depth.astype(np.float64), np.clip(rgb, 0, 1)


def make_scenes(count, seed=0, height=64, width=64, **kw):
    rng = np.random.default_rng(seed)
    return [make_scene(rng, height, width, **kw) for _ in range(count)]


def luminance_scene(rng, height=32, width=32, shapes=(3, 7)):
    """A noise-free scene quantized to 8 bits whose depth equals its guidance luminance."""
    from .baselines import luminance
    _, rgb = make_scene(rng, height, width, shapes, noise=0)
    rgb = np.round(rgb * 255) / 255
    return luminance(rgb), rgb


def write_toy_set(directory, count=8, size=32, seed=0):
    """Write ``count`` luminance scenes as 16-bit PGM depth + PPM guidance with a manifest."""
    from .manifest import SamplePair, write_manifest
    from .netpbm import write_image
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        depth, rgb = luminance_scene(rng, size, size)
        write_image(os.path.join(directory, f"depth_{i:02d}.pgm"), depth, 65535)
        write_image(os.path.join(directory, f"rgb_{i:02d}.ppm"), rgb, 255)
        pairs.append(SamplePair(f"depth_{i:02d}.pgm", f"rgb_{i:02d}.ppm"))
    path = os.path.join(directory, "manifest.jsonl")
    write_manifest(path, pairs, dataset="toy")
    return path


def toy_manifest_path():
    """Path of the bundled 8-pair toy manifest."""
    return str(resources.files("jointfilter") / "data" / "toy" / "manifest.jsonl")
