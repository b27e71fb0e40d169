"""Convolution slicers: schedules, kernel sampling, evaluation and gradients.

A slicer maps a ``(c, d, d)`` image to ``R^k`` through a chain of valid
convolutions that ends at spatial size 1.  Three schedule families halve
the spatial size at each layer:

``base``      stride-1 kernels of size ``d/2^h + 1``
``stride``    2x2 kernels with stride 2
``dilation``  2x2 kernels with dilation ``d/2^h``

All three finish with an ``a x a`` kernel, where ``d = 2^(N-1) * a`` and
``N`` is maximal.  An odd ``d`` is first reduced to ``d - 1`` by a 2x2
stride-1 kernel.  ``full`` is the degenerate one-layer schedule whose
single ``c x d x d`` kernel reproduces the ordinary sliced projection.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .convolution import ConvSpec, conv_backward, conv_forward, mac_count, output_dim
from .errors import ShapeError
from .tensor import as_measure, sample_unit_tensor

VARIANTS = ("base", "stride", "dilation", "full")
_ALIASES = {"b": "base", "s": "stride", "d": "dilation", "full": "full"}


def _sigmoid(z):
    return expit(z)


def _sigmoid_grad(z, y):
    return y * (1.0 - y)


# name -> (activation, derivative given (pre-activation, activation))
ACTIVATIONS = {"sigmoid": (_sigmoid, _sigmoid_grad)}


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int
    dilation: int
    in_size: int
    out_size: int
    activation: str = "none"

    @property
    def kernel_shape(self):
        return (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)

    @property
    def param_count(self):
        return self.out_channels * self.in_channels * self.kernel_size ** 2

    @property
    def mac_count(self):
        spec = ConvSpec(self.in_channels, self.kernel_size, self.stride,
                        self.dilation, self.out_channels)
        return mac_count(self.in_size, spec)


@dataclass(frozen=True)
class SlicerSchedule:
    variant: str
    nonlinear: bool
    k: int
    channels: int
    size: int
    layers: tuple

    @property
    def param_count(self):
        return sum(layer.param_count for layer in self.layers)

    @property
    def mac_count(self):
        return sum(layer.mac_count for layer in self.layers)

    @property
    def input_shape(self):
        return (self.channels, self.size, self.size)


def _even_plan(d):
    """Return ``(N, a)`` with ``d = 2^(N-1) * a`` and ``N`` maximal."""
    n, a = 1, d
    while a % 2 == 0:
        a //= 2
        n += 1
    return n, a


def _geometry(variant, d):
    """Per-layer ``(kernel_size, stride, dilation)`` for a scalar slicer on size ``d``."""
    if variant == "full":
        return [(d, 1, 1)]
    plan = []
    if d % 2:
        plan.append((2, 1, 1))
        d -= 1
    n, a = _even_plan(d)
    for h in range(1, n):
        if variant == "base":
            plan.append((d // 2 ** h + 1, 1, 1))
        elif variant == "stride":
            plan.append((2, 2, 1))
        else:
            plan.append((2, 1, d // 2 ** h))
    plan.append((a, 1, 1))
    return plan


def _normalize_variant(variant):
    v = _ALIASES.get(variant, variant)
    if v not in VARIANTS:
        raise ValueError(f"unknown slicer variant {variant!r}")
    return v


@lru_cache(maxsize=None)
def make_schedule(variant, c, d, k=1, nonlinear=False):
    """Build (and cache) the schedule for one slicer family.

    With ``k > 1`` every layer has ``k`` output channels: the first maps
    ``c -> k`` and the rest ``k -> k``.  The sigmoid of nonlinear slicers
    follows every layer except the last.
    """
    variant = _normalize_variant(variant)
    c, d, k = int(c), int(d), int(k)
    if c < 1 or k < 1:
        raise ShapeError("channels and k must be >= 1")
    if d < 2 and variant != "full":
        raise ShapeError(f"convolution slicers need d >= 2, got {d}")
    if d < 1:
        raise ShapeError(f"invalid image size {d}")
    geometry = _geometry(variant, d)
    layers = []
    size, cin = d, c
    for idx, (ks, s, b) in enumerate(geometry):
        out = output_dim(size, ks, s, b)
        last = idx == len(geometry) - 1
        act = "sigmoid" if (nonlinear and not last) else "none"
        layers.append(LayerSpec(cin, k, ks, s, b, size, out, act))
        size, cin = out, k
    if size != 1:  # pragma: no cover - guaranteed by construction
        raise ShapeError(f"schedule for d={d} ends at size {size}")
    return SlicerSchedule(variant, bool(nonlinear), k, c, d, tuple(layers))


def schedule_base(c, d):
    return make_schedule("base", c, d)


def schedule_stride(c, d):
    return make_schedule("stride", c, d)


def schedule_dilation(c, d):
    return make_schedule("dilation", c, d)


def make_k_schedule(variant, c, d, k, nonlinear=False):
    return make_schedule(variant, c, d, k, nonlinear)


def param_count(schedule):
    return schedule.param_count


def slicer_mac_count(schedule):
    return schedule.mac_count


@dataclass(frozen=True)
class KernelStack:
    schedule: SlicerSchedule
    kernels: tuple  # one (out_channels, in_channels, k, k) array per layer


def sample_kernel_stack(schedule, rng):
    """Independent uniform draws, one unit-norm kernel per layer and output channel."""
    kernels = []
    for layer in schedule.layers:
        shape = layer.kernel_shape[1:]
        kernels.append(np.stack([sample_unit_tensor(shape, rng)
                                 for _ in range(layer.out_channels)]))
    return KernelStack(schedule, tuple(kernels))


def renormalize(kernels):
    """Project each output-channel kernel back onto its unit sphere."""
    out = []
    for w in kernels:
        norms = np.sqrt(np.sum(w * w, axis=(1, 2, 3), keepdims=True))
        out.append(w / norms)
    return tuple(out)


def _check_input(schedule, x):
    if x.shape[1:] != schedule.input_shape:
        raise ShapeError(
            f"slicer expects inputs of shape {schedule.input_shape}, got {x.shape[1:]}")


def project(stack, x):
    """Slice a batch ``(n, c, d, d) -> (n, k)``."""
    x = as_measure(x)
    _check_input(stack.schedule, x)
    for layer, w in zip(stack.schedule.layers, stack.kernels):
        x = conv_forward(x, w, layer.stride, layer.dilation)
        if layer.activation != "none":
            x = ACTIVATIONS[layer.activation][0](x)
    return x.reshape(x.shape[0], -1)


def apply_slicer(stack, x):
    """Slice one ``(c, d, d)`` tensor; a float for ``k = 1``, else a length-k array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected a (c, d, d) tensor, got shape {x.shape}")
    out = project(stack, x[None])[0]
    return float(out[0]) if stack.schedule.k == 1 else out


def forward(stack, x):
    """Slice a batch and keep the intermediates needed by :func:`backward`."""
    x = as_measure(x)
    _check_input(stack.schedule, x)
    tape = []
    h = x
    for layer, w in zip(stack.schedule.layers, stack.kernels):
        z = conv_forward(h, w, layer.stride, layer.dilation)
        y = z if layer.activation == "none" else ACTIVATIONS[layer.activation][0](z)
        tape.append((h, z, y))
        h = y
    return h.reshape(h.shape[0], -1), tape


def backward(stack, tape, upstream):
    """Kernel gradients of ``sum(upstream * forward(stack, x)[0])``."""
    layers = stack.schedule.layers
    g = np.asarray(upstream, dtype=np.float64).reshape(tape[-1][2].shape)
    grads = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        layer = layers[idx]
        h, z, y = tape[idx]
        if layer.activation != "none":
            g = g * ACTIVATIONS[layer.activation][1](z, y)
        g, grads[idx] = conv_backward(h, stack.kernels[idx], g, layer.stride, layer.dilation)
    return tuple(grads)


def project_vjp(stack, x, upstream):
    """Projections of ``x`` and the kernel gradients for a given ``(n, k)`` upstream."""
    out, tape = forward(stack, x)
    return out, backward(stack, tape, upstream)


def apply_slicer_with_grad(stack, x):
    """Scalar slicer value at ``x`` and its gradient w.r.t. every kernel entry."""
    if stack.schedule.k != 1:
        raise ShapeError("gradients are defined for scalar (k = 1) slicers")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected a (c, d, d) tensor, got shape {x.shape}")
    value, grads = project_vjp(stack, x[None], np.ones((1, 1)))
    return float(value[0, 0]), grads


def describe(schedule):
    """Plain-dict dump of a schedule (used by ``slicer-info``)."""
    return {
        "variant": schedule.variant,
        "nonlinear": schedule.nonlinear,
        "k": schedule.k,
        "channels": schedule.channels,
        "size": schedule.size,
        "layers": [
            {
                "kernel": list(layer.kernel_shape[1:]),
                "out_channels": layer.out_channels,
                "stride": layer.stride,
                "dilation": layer.dilation,
                "in_size": layer.in_size,
                "out_size": layer.out_size,
                "activation": layer.activation,
                "params": layer.param_count,
                "macs": layer.mac_count,
            }
            for layer in schedule.layers
        ],
        "param_count": schedule.param_count,
        "mac_count": schedule.mac_count,
    }
