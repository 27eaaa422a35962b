"""Pure-numpy versions of the kernels in ``_kernels.pyx``.

Same signatures, same output buffers. Each kernel tap is one GEMM over the
channel axis, so no im2col buffer is materialized. ``threads`` is accepted
and ignored.
"""

import numpy as np


def corr2d_valid(xp, w, b, out, threads=1):
    N, C, Hp, Wp = xp.shape
    O, _, K, _ = w.shape
    H, W = out.shape[2], out.shape[3]
    acc = np.empty((O, N, H, W), dtype=out.dtype)
    acc[...] = b[:, None, None, None]
    for ky in range(K):
        for kx in range(K):
            win = xp[:, :, ky:ky + H, kx:kx + W]
            acc += np.tensordot(w[:, :, ky, kx], win, axes=([1], [1]))
    out[...] = acc.transpose(1, 0, 2, 3)


def corr2d_weight_grad(xp, gout, gw, threads=1):
    H, W = gout.shape[2], gout.shape[3]
    K = gw.shape[2]
    for ky in range(K):
        for kx in range(K):
            win = xp[:, :, ky:ky + H, kx:kx + W]
            gw[:, :, ky, kx] = np.tensordot(gout, win, axes=([0, 2, 3], [0, 2, 3]))
