"""Valid (unpadded) 2-D convolution with stride and dilation.

Every output entry is accumulated as ``acc = 0; acc += x * w`` over
``(channel, kernel_row, kernel_col)`` in that order.  The numba and numpy
forward kernels follow the same order and therefore agree bit for bit with
each other and with a naive triple loop.
"""
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._backend import njit
from .errors import ShapeError


def output_dim(d, k, s=1, b=1):
    """Spatial size after convolving a ``d x d`` input with a ``k x k`` kernel."""
    d, k, s, b = int(d), int(k), int(s), int(b)
    if min(d, k, s, b) < 1:
        raise ShapeError(f"convolution arguments must be >= 1, got d={d} k={k} s={s} b={b}")
    span = d - b * (k - 1) - 1
    if span < 0 or span % s:
        raise ShapeError(
            f"kernel {k} (stride {s}, dilation {b}) does not tile input of size {d}")
    return span // s + 1


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    kernel_size: int
    stride: int = 1
    dilation: int = 1
    out_channels: int = 1


def mac_count(d, spec):
    """Exact multiply-accumulate count ``d'^2 * c_in * k^2`` (times ``c_out``)."""
    dp = output_dim(d, spec.kernel_size, spec.stride, spec.dilation)
    return dp * dp * spec.in_channels * spec.kernel_size ** 2 * spec.out_channels


# -- numba kernels -----------------------------------------------------------

@njit
def _forward_loops(x, w, s, b, out):
    n, ci = x.shape[0], x.shape[1]
    co, k = w.shape[0], w.shape[2]
    dp = out.shape[2]
    for m in range(n):
        for o in range(co):
            for i in range(dp):
                for j in range(dp):
                    acc = 0.0
                    for h in range(ci):
                        for a in range(k):
                            r = s * i + b * a
                            for q in range(k):
                                acc += x[m, h, r, s * j + b * q] * w[o, h, a, q]
                    out[m, o, i, j] = acc


@njit
def _backward_loops(x, w, g, s, b, dx, dw):
    n, ci = x.shape[0], x.shape[1]
    co, k = w.shape[0], w.shape[2]
    dp = g.shape[2]
    for m in range(n):
        for o in range(co):
            for i in range(dp):
                for j in range(dp):
                    gv = g[m, o, i, j]
                    if gv == 0.0:
                        continue
                    for h in range(ci):
                        for a in range(k):
                            r = s * i + b * a
                            for q in range(k):
                                col = s * j + b * q
                                dw[o, h, a, q] += gv * x[m, h, r, col]
                                dx[m, h, r, col] += gv * w[o, h, a, q]


# -- numpy kernels -----------------------------------------------------------

def _tap(x, h, a, q, s, b, dp):
    r0, c0 = b * a, b * q
    return x[:, h, r0:r0 + s * (dp - 1) + 1:s, c0:c0 + s * (dp - 1) + 1:s]


def _forward_numpy(x, w, s, b, out):
    co, ci, k = w.shape[0], w.shape[1], w.shape[2]
    dp = out.shape[2]
    out[...] = 0.0
    for o in range(co):
        acc = out[:, o]
        for h in range(ci):
            for a in range(k):
                for q in range(k):
                    acc += _tap(x, h, a, q, s, b, dp) * w[o, h, a, q]


def _backward_numpy(x, w, g, s, b, dx, dw):
    co, ci, k = w.shape[0], w.shape[1], w.shape[2]
    dp = g.shape[2]
    for o in range(co):
        go = g[:, o]
        for h in range(ci):
            for a in range(k):
                for q in range(k):
                    dw[o, h, a, q] += np.vdot(go, _tap(x, h, a, q, s, b, dp))
                    _tap(dx, h, a, q, s, b, dp)[...] += go * w[o, h, a, q]


# -- batched entry points ----------------------------------------------------

def conv_forward(x, w, s=1, b=1):
    """Batched convolution: ``(n, ci, d, d) x (co, ci, k, k) -> (n, co, d', d')``."""
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"kernel has {w.shape[1]} channels, input has {x.shape[1]}")
    dp = output_dim(x.shape[2], w.shape[2], s, b)
    out = np.empty((x.shape[0], w.shape[0], dp, dp))
    if _backend.get_backend() == "numba":
        _forward_loops(x, w, int(s), int(b), out)
    else:
        _forward_numpy(x, w, int(s), int(b), out)
    return out


def conv_backward(x, w, g, s=1, b=1):
    """Vector-Jacobian product of :func:`conv_forward`.

    Given the upstream gradient ``g`` with the output's shape, returns
    ``(grad_input, grad_kernel)``.
    """
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    g = np.ascontiguousarray(g, dtype=np.float64)
    if _backend.get_backend() == "numba":
        _backward_loops(x, w, g, int(s), int(b), dx, dw)
    else:
        _backward_numpy(x, w, g, int(s), int(b), dx, dw)
    return dx, dw


def conv2d(x, kernel, s=1, b=1):
    """Convolve one ``(c, d, d)`` tensor with one ``(c, k, k)`` kernel.

    Returns a ``(1, d', d')`` tensor.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if x.ndim != 3 or kernel.ndim != 3:
        raise ShapeError("conv2d expects (c, d, d) input and (c, k, k) kernel")
    if x.shape[0] != kernel.shape[0]:
        raise ShapeError(f"kernel has {kernel.shape[0]} channels, input has {x.shape[0]}")
    if x.shape[1] != x.shape[2] or kernel.shape[1] != kernel.shape[2]:
        raise ShapeError("only square inputs and kernels are supported")
    return conv_forward(x[None], kernel[None], s, b)[0]
