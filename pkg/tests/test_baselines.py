import math

import numpy as np
import pytest

from jointfilter import baselines as bl
from jointfilter.baselines import GFParams, JBUParams
from jointfilter.tensor import ShapeError


def clamp(v, n):
    return min(max(v, 0), n - 1)


def bicubic_oracle(img, out_h, out_w):
    c, h, w = img.shape
    out = np.zeros((c, out_h, out_w))
    sy, sx = out_h / h, out_w / w
    for ch in range(c):
        for i in range(out_h):
            for j in range(out_w):
                y = (i + 0.5) / sy - 0.5
                x = (j + 0.5) / sx - 0.5
                y0, x0 = math.floor(y), math.floor(x)
                acc = 0.0
                for u in range(y0 - 1, y0 + 3):
                    for v in range(x0 - 1, x0 + 3):
                        wgt = bl.cubic_kernel(y - u) * bl.cubic_kernel(x - v)
                        acc += wgt * img[ch, clamp(u, h), clamp(v, w)]
                out[ch, i, j] = acc
    return out


def jbu_oracle(low, guide, p, use_range=True):
    c, lh, lw = low.shape
    _, hh, hw = guide.shape
    s = hh // lh
    out = np.zeros((c, hh, hw))
    r = p.window_radius
    for qy in range(hh):
        for qx in range(hw):
            num, den = np.zeros(c), 0.0
            for py in range(qy // s - r, qy // s + r + 1):
                for px in range(qx // s - r, qx // s + r + 1):
                    d2 = (qy - py * s) ** 2 + (qx - px * s) ** 2
                    wgt = math.exp(-d2 / (2 * p.sigma_spatial ** 2))
                    if use_range:
                        gp = guide[:, clamp(py * s, hh), clamp(px * s, hw)]
                        g2 = float(np.sum((guide[:, qy, qx] - gp) ** 2))
                        wgt *= math.exp(-g2 / (2 * p.sigma_range ** 2))
                    num += wgt * low[:, clamp(py, lh), clamp(px, lw)]
                    den += wgt
            out[:, qy, qx] = num / den
    return out


def window(img, y, x, r):
    h, w = img.shape
    return [img[clamp(u, h), clamp(v, w)] for u in range(y - r, y + r + 1) for v in range(x - r, x + r + 1)]


def gf_oracle(t, g, r, eps):
    h, w = t.shape
    a, b = np.zeros((h, w)), np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            tw, gw = np.array(window(t, y, x, r)), np.array(window(g, y, x, r))
            mg, mt = gw.mean(), tw.mean()
            a[y, x] = ((gw * tw).mean() - mg * mt) / ((gw * gw).mean() - mg * mg + eps)
            b[y, x] = mt - a[y, x] * mg
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = np.mean(window(a, y, x, r)) * g[y, x] + np.mean(window(b, y, x, r))
    return out


def test_nearest_downsample_examples():
    np.testing.assert_array_equal(bl.nearest_downsample(np.array([[1.0, 2], [3, 4]]), 2), [[[1.0]]])
    x = np.arange(12.0).reshape(1, 3, 4)
    np.testing.assert_array_equal(bl.nearest_downsample(x, 1), x)
    np.testing.assert_array_equal(bl.nearest_downsample(np.full((1, 6, 6), 0.3), 3), 0.3)
    with pytest.raises(ShapeError):
        bl.nearest_downsample(np.zeros((1, 5, 6)), 2)


def test_block_constant_round_trip(rng):
    low = rng.random((2, 3, 4))
    np.testing.assert_array_equal(bl.nearest_downsample(bl.nearest_upsample(low, 4), 4), low)


def test_cubic_kernel_values():
    np.testing.assert_allclose(bl.cubic_kernel([0, 1, 2, 3]), [1, 0, 0, 0], atol=1e-15)
    # weights at any phase sum to one
    for t in np.linspace(0, 1, 7):
        assert bl.cubic_kernel(np.array([t + 1, t, 1 - t, 2 - t])).sum() == pytest.approx(1.0)


def test_bicubic_constant():
    np.testing.assert_allclose(bl.bicubic_resize(np.full((1, 5, 7), 0.7), 13, 4), 0.7, atol=1e-12)


def test_bicubic_reproduces_linear_ramp():
    ramp = np.tile(np.arange(8.0), (1, 8, 1))
    up = bl.bicubic_upsample(ramp, 2)[0]
    # interior away from the clamped borders is exactly linear in x
    diffs = np.diff(up[:, 4:12], axis=1)
    np.testing.assert_allclose(diffs, 0.5, atol=1e-12)


@pytest.mark.parametrize("shape", [(6, 6, 12, 12), (6, 6, 4, 9), (3, 5, 24, 40)])
def test_bicubic_matches_oracle(rng, shape):
    h, w, oh, ow = shape
    img = rng.random((1, h, w))
    np.testing.assert_allclose(bl.bicubic_resize(img, oh, ow), bicubic_oracle(img, oh, ow), atol=1e-6, rtol=0)


def test_jbu_constant_guidance_is_spatial_only(rng):
    low = rng.random((1, 4, 4))
    p = JBUParams.for_scale(2)
    out = bl.joint_bilateral_upsample(low, np.full((3, 8, 8), 0.4), p)
    np.testing.assert_allclose(out, jbu_oracle(low, np.zeros((3, 8, 8)), p, use_range=False), atol=1e-6)


def test_jbu_huge_sigma_range_ignores_guidance(rng):
    low = rng.random((1, 4, 4))
    p = JBUParams(1.0, sigma_range=1e6)
    a = bl.joint_bilateral_upsample(low, rng.random((3, 8, 8)), p)
    b = bl.joint_bilateral_upsample(low, np.zeros((3, 8, 8)), p)
    np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_jbu_matches_oracle(seed):
    r = np.random.default_rng(seed)
    low, guide = r.random((1, 4, 4)), r.random((3, 8, 8))
    p = JBUParams(r.uniform(0.5, 3), r.uniform(0.05, 0.5), int(r.integers(1, 3)))
    np.testing.assert_allclose(bl.joint_bilateral_upsample(low, guide, p), jbu_oracle(low, guide, p), atol=1e-6)


def test_jbu_rejects_non_integer_ratio():
    with pytest.raises(ShapeError):
        bl.joint_bilateral_upsample(np.zeros((1, 3, 3)), np.zeros((3, 8, 8)))
    with pytest.raises(ShapeError):
        bl.joint_bilateral_upsample(np.zeros((1, 4, 4)), np.zeros((3, 8, 12)))


def test_param_validation():
    with pytest.raises(ValueError):
        JBUParams(0.0)
    with pytest.raises(ValueError):
        GFParams(0)
    with pytest.raises(ValueError):
        GFParams(2, epsilon=0)
    assert JBUParams.for_scale(8) == JBUParams(4.0, 0.1, 2)
    assert GFParams.for_scale(4) == GFParams(4, 1e-4)


def test_box_sum_exact_on_integers(rng):
    img = rng.integers(0, 100, size=(9, 7)).astype(np.float64)
    for r in (1, 2, 4):
        naive = np.array([[sum(window(img, y, x, r)) for x in range(7)] for y in range(9)])
        np.testing.assert_array_equal(bl.box_sum(img, r), naive)


def test_gf_constant_guidance_is_double_box_mean(rng):
    t = rng.random((1, 8, 8))
    out = bl.guided_filter(t, np.full((1, 8, 8), 0.5), GFParams(2))
    np.testing.assert_allclose(out, bl.box_mean(bl.box_mean(t, 2), 2), atol=1e-6)


def test_gf_self_guided_is_near_identity(rng):
    t = rng.random((1, 12, 12))
    np.testing.assert_allclose(bl.guided_filter(t, t, GFParams(2, 1e-8)), t, atol=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_gf_matches_oracle(seed):
    r = np.random.default_rng(seed)
    t, g = r.random((8, 8)), r.random((8, 8))
    np.testing.assert_allclose(bl.guided_filter(t, g, GFParams(2, 1e-3)), gf_oracle(t, g, 2, 1e-3)[None],
                               atol=1e-6)


def test_gf_errors():
    with pytest.raises(ShapeError):
        bl.guided_filter(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))
    with pytest.raises(ShapeError):
        bl.guided_filter(np.zeros((3, 4, 4)), np.zeros((3, 4, 4)))


def test_constants_map_to_themselves():
    c = 0.42
    guide = np.random.default_rng(0).random((3, 16, 16))
    np.testing.assert_allclose(bl.nearest_downsample(np.full((1, 16, 16), c), 4), c)
    np.testing.assert_allclose(bl.bicubic_upsample(np.full((1, 4, 4), c), 4), c, atol=1e-12)
    np.testing.assert_allclose(bl.joint_bilateral_upsample(np.full((1, 4, 4), c), guide), c, atol=1e-12)
    np.testing.assert_allclose(bl.guided_upsample(np.full((1, 4, 4), c), guide), c, atol=1e-9)


def test_outputs_stay_in_input_range():
    r = np.random.default_rng(7)
    for _ in range(100):
        low, guide = r.random((1, 4, 4)), r.random((3, 8, 8))
        out = bl.joint_bilateral_upsample(low, guide, JBUParams(r.uniform(0.5, 3), r.uniform(0.01, 1)))
        assert low.min() - 1e-6 <= out.min() and out.max() <= low.max() + 1e-6
        t, g = r.random((1, 8, 8)), r.random((1, 8, 8))
        out = bl.guided_filter(t, g, GFParams(int(r.integers(1, 4)), 10 ** r.uniform(-4, 0)))
        assert t.min() - 1e-6 <= out.min() and out.max() <= t.max() + 1e-6


def test_luminance():
    np.testing.assert_allclose(bl.luminance(np.ones((3, 2, 2))), 1.0)
    np.testing.assert_allclose(bl.luminance(np.stack([np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2))])), 0.299)
    with pytest.raises(ShapeError):
        bl.luminance(np.zeros((2, 3, 3)))
