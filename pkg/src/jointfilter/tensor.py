"""Dense tensors, 2-D cross-correlation and ReLU with their gradients.

A tensor is a C-contiguous numpy array laid out channel-major, row-major:
``(channels, height, width)``. The convolution routines also accept a
leading batch axis ``(batch, channels, height, width)``; the network and
the trainer use that form internally.

Samples are float32 in production paths and float64 for gradient checks.
The dtype of a layer's weights decides the dtype of the computation.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend

SAME = "same"
VALID = "valid"
PADDING_MODES = (SAME, VALID)


class ShapeError(ValueError):
    """Tensor shapes or channel counts do not fit together."""


def tensor(data, dtype=np.float32):
    """Return ``data`` as a contiguous rank-3 array of ``dtype``."""
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"expected (channels, height, width), got shape {arr.shape}")
    return arr


def zeros(channels, height, width, dtype=np.float32):
    return np.zeros((channels, height, width), dtype=dtype)


@dataclass(eq=False)
class ConvLayer:
    """Square-kernel convolution parameters.

    ``weights`` has shape (out, in, k, k) and ``biases`` shape (out,).
    """

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights)
        b = np.ascontiguousarray(self.biases, dtype=w.dtype)
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ShapeError(f"weights must be (out, in, k, k), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"biases must have shape ({w.shape[0]},), got {b.shape}")
        self.weights = w
        self.biases = b

    @classmethod
    def zeros(cls, out_channels, in_channels, kernel_size, dtype=np.float32):
        return cls(np.zeros((out_channels, in_channels, kernel_size, kernel_size), dtype),
                   np.zeros(out_channels, dtype))

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel_size(self):
        return self.weights.shape[2]

    @property
    def dtype(self):
        return self.weights.dtype

    @property
    def size(self):
        return self.weights.size + self.biases.size

    def copy(self):
        return ConvLayer(self.weights.copy(), self.biases.copy())


def _pad_amount(kernel_size, pad):
    if pad == SAME:
        if kernel_size % 2 == 0:
            raise ShapeError(f"same padding needs an odd kernel, got {kernel_size}")
        return (kernel_size - 1) // 2
    if pad == VALID:
        return 0
    raise ValueError(f"padding must be one of {PADDING_MODES}, got {pad!r}")


def _batched(x, dtype):
    x = np.asarray(x)
    if x.ndim == 3:
        return np.ascontiguousarray(x[None], dtype=dtype), True
    if x.ndim == 4:
        return np.ascontiguousarray(x, dtype=dtype), False
    raise ShapeError(f"expected rank-3 or rank-4 tensor, got shape {x.shape}")


def _zero_pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d_forward(x, layer, pad=SAME):
    """Cross-correlate ``x`` with every output filter of ``layer`` and add the bias."""
    xb, squeeze = _batched(x, layer.dtype)
    k = layer.kernel_size
    if xb.shape[1] != layer.in_channels:
        raise ShapeError(f"input has {xb.shape[1]} channels, layer expects {layer.in_channels}")
    p = _pad_amount(k, pad)
    h, w = xb.shape[2] + 2 * p - k + 1, xb.shape[3] + 2 * p - k + 1
    if h < 1 or w < 1:
        raise ShapeError(f"input {xb.shape[2]}x{xb.shape[3]} smaller than kernel {k} in valid mode")
    out = np.empty((xb.shape[0], layer.out_channels, h, w), dtype=layer.dtype)
    _backend.kernels().corr2d_valid(_zero_pad(xb, p), layer.weights, layer.biases, out,
                                    _backend.get_num_threads())
    return out[0] if squeeze else out


def conv2d_backward(x, layer, pad, grad_output, need_input_grad=True):
    """Gradients of ``conv2d_forward(x, layer, pad)`` given the output gradient.

    Returns ``(grad_input, grad_weights, grad_biases)``; ``grad_input`` is
    None when ``need_input_grad`` is false.
    """
    xb, squeeze = _batched(x, layer.dtype)
    gb, _ = _batched(grad_output, layer.dtype)
    k = layer.kernel_size
    p = _pad_amount(k, pad)
    expect = (xb.shape[0], layer.out_channels, xb.shape[2] + 2 * p - k + 1, xb.shape[3] + 2 * p - k + 1)
    if xb.shape[1] != layer.in_channels:
        raise ShapeError(f"input has {xb.shape[1]} channels, layer expects {layer.in_channels}")
    if gb.shape != expect:
        raise ShapeError(f"grad_output shape {gb.shape[1:] if squeeze else gb.shape} "
                         f"does not match forward output {expect[1:] if squeeze else expect}")
    kern = _backend.kernels()
    threads = _backend.get_num_threads()

    grad_w = np.empty_like(layer.weights)
    kern.corr2d_weight_grad(_zero_pad(xb, p), gb, grad_w, threads)
    grad_b = gb.sum(axis=(0, 2, 3))
    if not need_input_grad:
        return None, grad_w, grad_b

    # input gradient: full correlation with the flipped, transposed kernel
    flipped = np.ascontiguousarray(layer.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    grad_x = np.empty_like(xb)
    kern.corr2d_valid(_zero_pad(gb, k - 1 - p), flipped,
                      np.zeros(layer.in_channels, layer.dtype), grad_x, threads)
    return (grad_x[0] if squeeze else grad_x), grad_w, grad_b


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_output):
    """Pass ``grad_output`` where ``x > 0``; the subgradient at 0 is 0."""
    x = np.asarray(x)
    grad_output = np.asarray(grad_output)
    if x.shape != grad_output.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {grad_output.shape}")
    return np.where(x > 0, grad_output, 0).astype(grad_output.dtype, copy=False)


def grad_check(f, grad, params, epsilon=1e-6, indices=None):
    """Largest relative error between an analytic gradient and central differences.

    ``f(params) -> float`` and ``grad(params) -> array`` evaluate on a flat
    parameter vector. Only ``indices`` are perturbed when given. The error
    per entry is ``|a - n| / max(1e-12, |a| + |n|)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = np.array(params, copy=True)
    analytic = np.asarray(grad(params.copy())).ravel()
    if not np.all(np.isfinite(analytic)):
        raise FloatingPointError("analytic gradient is not finite")
    if indices is None:
        indices = range(params.size)
    flat = params.reshape(-1)
    worst = 0.0
    for i in indices:
        orig = flat[i]
        flat[i] = orig + epsilon
        hi = float(flat[i])
        fp = float(f(params))
        flat[i] = orig - epsilon
        lo = float(flat[i])
        fm = float(f(params))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value at parameter {i}")
        # divide by the step actually taken; it is rounded in 32-bit storage
        numeric = (fp - fm) / (hi - lo)
        a = float(analytic[i])
        err = abs(a - numeric) / max(1e-12, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst
