# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cross-correlation kernels.

Every output element is accumulated in a fixed order (bias, then input
channel, kernel row, kernel column), so the result does not depend on how
rows are split across OpenMP threads.
"""

from cython.parallel cimport prange, parallel
from libc.stdlib cimport malloc, free
from libc.string cimport memset

ctypedef fused floating:
    float
    double


cdef inline void _axpy(floating *dst, const floating *src, floating a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t x
    for x in range(n):
        dst[x] = dst[x] + a * src[x]


cdef inline void _axpy4(floating *d0, floating *d1, floating *d2, floating *d3,
                        const floating *src, floating a0, floating a1, floating a2, floating a3,
                        Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t x
    cdef floating s
    for x in range(n):
        s = src[x]
        d0[x] = d0[x] + a0 * s
        d1[x] = d1[x] + a1 * s
        d2[x] = d2[x] + a2 * s
        d3[x] = d3[x] + a3 * s


def corr2d_valid(const floating[:, :, :, ::1] xp,
                 const floating[:, :, :, ::1] w,
                 const floating[::1] b,
                 floating[:, :, :, ::1] out,
                 int threads=1):
    """out[n, o] = b[o] + sum_c xp[n, c] (*) w[o, c], valid support.

    ``xp`` is already padded; ``out`` must have shape
    (N, O, Hp - K + 1, Wp - K + 1).
    """
    cdef Py_ssize_t N = xp.shape[0], C = xp.shape[1]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t H = out.shape[2], W = out.shape[3]
    cdef Py_ssize_t t, n, y, o, c, ky, kx, x
    cdef floating *r0
    cdef floating *r1
    cdef floating *r2
    cdef floating *r3
    cdef const floating *src

    if threads < 1:
        threads = 1
    with nogil:
        for t in prange(N * H, num_threads=threads, schedule="static"):
            n = t // H
            y = t % H
            o = 0
            while o + 4 <= O:
                r0 = &out[n, o, y, 0]
                r1 = &out[n, o + 1, y, 0]
                r2 = &out[n, o + 2, y, 0]
                r3 = &out[n, o + 3, y, 0]
                for x in range(W):
                    r0[x] = b[o]
                    r1[x] = b[o + 1]
                    r2[x] = b[o + 2]
                    r3[x] = b[o + 3]
                for c in range(C):
                    for ky in range(K):
                        src = &xp[n, c, y + ky, 0]
                        for kx in range(K):
                            _axpy4(r0, r1, r2, r3, src + kx,
                                   w[o, c, ky, kx], w[o + 1, c, ky, kx],
                                   w[o + 2, c, ky, kx], w[o + 3, c, ky, kx], W)
                o = o + 4
            while o < O:
                r0 = &out[n, o, y, 0]
                for x in range(W):
                    r0[x] = b[o]
                for c in range(C):
                    for ky in range(K):
                        src = &xp[n, c, y + ky, 0]
                        for kx in range(K):
                            _axpy(r0, src + kx, w[o, c, ky, kx], W)
                o = o + 1


def corr2d_weight_grad(const floating[:, :, :, ::1] xp,
                       const floating[:, :, :, ::1] gout,
                       floating[:, :, :, ::1] gw,
                       int threads=1):
    """gw[o, c, ky, kx] = sum_{n,y,x} gout[n, o, y, x] * xp[n, c, y+ky, x+kx].

    Each tap keeps a row of partial sums over (n, y); the row is reduced
    left to right at the end.
    """
    cdef Py_ssize_t N = xp.shape[0], C = xp.shape[1]
    cdef Py_ssize_t O = gout.shape[1], H = gout.shape[2], W = gout.shape[3]
    cdef Py_ssize_t K = gw.shape[2]
    cdef Py_ssize_t t, n, y, o, c, ky, kx, x
    cdef floating acc
    cdef floating *buf
    cdef floating *row
    cdef const floating *g
    cdef const floating *s

    if threads < 1:
        threads = 1
    with nogil, parallel(num_threads=threads):
        buf = <floating *> malloc(K * K * W * sizeof(floating))
        for t in prange(O * C, schedule="static"):
            o = t // C
            c = t % C
            memset(buf, 0, K * K * W * sizeof(floating))
            for n in range(N):
                for y in range(H):
                    g = &gout[n, o, y, 0]
                    for ky in range(K):
                        s = &xp[n, c, y + ky, 0]
                        for kx in range(K):
                            row = buf + (ky * K + kx) * W
                            for x in range(W):
                                row[x] = row[x] + g[x] * s[x + kx]
            for ky in range(K):
                for kx in range(K):
                    row = buf + (ky * K + kx) * W
                    acc = 0
                    for x in range(W):
                        acc = acc + row[x]
                    gw[o, c, ky, kx] = acc
        free(buf)
