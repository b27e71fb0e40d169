"""Sliced and convolution-sliced Wasserstein estimators.

Monte Carlo methods (``sw``, ``csw-*``, ``ncsw-*``) average ``W_p^p`` over
``L`` random slices and return the p-th root.  Slice ``i`` is drawn from
``RandomSource(seed).substream(i)``, so the estimate does not depend on
the thread count, on chunking, or on argument order.

Max-sliced methods (``max-sw``, ``max-csw-*``, ``prw``, ``cprw-*``) run
projected gradient ascent on ``W_p`` starting from slice 0 and report the
best value seen.  The sorting permutation (or assignment, for ``k > 1``)
is frozen within each gradient evaluation.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import slicer as sl
from .errors import ShapeError
from .ot import (
    _check_p, abs_pow, exact_wasserstein_assignment, optimal_assignment, sorted_costs,
    wasserstein1d_general,
)
from .tensor import as_measure, as_random_source, sample_unit_tensor

_VARIANT_SUFFIX = {"b": "base", "s": "stride", "d": "dilation", "full": "full"}
MONTE_CARLO = ("sw", "csw", "ncsw")
ASCENT = ("max-sw", "max-csw", "prw", "cprw")

METHODS = (
    ["sw", "max-sw", "prw", "exact"]
    + [f"{fam}-{v}" for fam in ("csw", "ncsw", "max-csw", "cprw") for v in "bsd"]
    + ["csw-full"]
)

# projections are evaluated in fixed-size chunks, independent of thread count
CHUNK = 8


def parse_method(name):
    """Split a method name into ``(family, variant, nonlinear)``."""
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    if name in ("sw", "max-sw", "prw", "exact"):
        return name, None, False
    family, _, suffix = name.rpartition("-")
    variant = _VARIANT_SUFFIX[suffix]
    if family == "ncsw":
        return "csw", variant, True
    return family, variant, False


@dataclass(frozen=True)
class MethodSpec:
    method: str = "csw-s"
    p: float = 2.0
    L: int = 100
    k: int = 2
    steps: int = 100
    lr: float = 0.01
    seed: int = 42

    def __post_init__(self):
        parse_method(self.method)
        _check_p(self.p)
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.steps < 1 or not self.lr > 0:
            raise ValueError("steps must be >= 1 and lr > 0")

    @property
    def family(self):
        return parse_method(self.method)[0]

    @property
    def variant(self):
        return parse_method(self.method)[1]

    @property
    def nonlinear(self):
        return parse_method(self.method)[2]

    def as_dict(self):
        return asdict(self)


def _pair(mu, nu, equal=True):
    mu, nu = as_measure(mu), as_measure(nu)
    if mu.shape[1:] != nu.shape[1:]:
        raise ShapeError(f"support shapes differ: {mu.shape[1:]} vs {nu.shape[1:]}")
    if equal and mu.shape[0] != nu.shape[0]:
        raise ShapeError(
            f"equal support counts required, got {mu.shape[0]} and {nu.shape[0]}")
    return mu, nu


def _threads(threads):
    if threads is None:
        return os.cpu_count() or 1
    return max(1, int(threads))


# -- Monte Carlo slicing -----------------------------------------------------

def _slice_fn(family, variant, nonlinear, shape, source):
    """Return ``f(i, X) -> (n,)`` evaluating slice ``i`` on stacked supports."""
    c, d, _ = shape
    if family == "sw":
        def run(indices, x):
            theta = np.stack([sample_unit_tensor(shape, source.substream(i)).ravel()
                              for i in indices])
            return theta @ x.reshape(x.shape[0], -1).T
        return run
    schedule = sl.make_schedule(variant, c, d, 1, nonlinear)

    def run(indices, x):
        out = np.empty((len(indices), x.shape[0]))
        for row, i in enumerate(indices):
            stack = sl.sample_kernel_stack(schedule, source.substream(i))
            out[row] = sl.project(stack, x)[:, 0]
        return out
    return run


def slice_measures(measures, method="csw-s", L=100, rng=42, threads=None):
    """Project several measures with the same ``L`` slices.

    Returns one ``(L, n_j)`` array per measure.  Slices are shared, so any
    pair of outputs gives exactly the estimate the pairwise call would.
    """
    family, variant, nonlinear = parse_method(method)
    if family not in MONTE_CARLO:
        raise ValueError(f"{method!r} is not a Monte Carlo method")
    measures = [as_measure(m) for m in measures]
    shape = measures[0].shape[1:]
    if any(m.shape[1:] != shape for m in measures):
        raise ShapeError("all measures must share the support shape")
    if L < 1:
        raise ValueError("L must be >= 1")
    source = as_random_source(rng)
    run = _slice_fn(family, variant, nonlinear, shape, source)
    stacked = measures[0] if len(measures) == 1 else np.concatenate(measures)
    chunks = [range(s, min(s + CHUNK, L)) for s in range(0, L, CHUNK)]
    workers = min(_threads(threads), len(chunks))
    if workers == 1:
        parts = [run(ch, stacked) for ch in chunks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ch: run(ch, stacked), chunks))
    proj = np.concatenate(parts, axis=0)
    bounds = np.cumsum([0] + [m.shape[0] for m in measures])
    return [proj[:, bounds[j]:bounds[j + 1]] for j in range(len(measures))]


def costs_from_projections(px, py, p=2, unequal=False):
    """Per-slice ``W_p^p`` from ``(L, n)`` and ``(L, m)`` projections."""
    p = _check_p(p)
    if px.shape[1] == py.shape[1]:
        return sorted_costs(px, py, p)
    if not unequal:
        raise ShapeError(
            f"equal support counts required, got {px.shape[1]} and {py.shape[1]}")
    return np.array([wasserstein1d_general(a, b, p) ** p for a, b in zip(px, py)])


def projected_costs(mu, nu, method="csw-s", p=2, L=100, rng=42, threads=None, unequal=False):
    """``W_p^p`` of each of the ``L`` slices (before averaging)."""
    mu, nu = _pair(mu, nu, equal=not unequal)
    px, py = slice_measures([mu, nu], method, L, rng, threads)
    return costs_from_projections(px, py, p, unequal)


def _mc(mu, nu, method, p, L, rng, threads, unequal):
    p = _check_p(p)
    costs = projected_costs(mu, nu, method, p, L, rng, threads, unequal)
    return float(np.mean(costs)) ** (1.0 / p)


def sw(mu, nu, p=2, L=100, rng=42, threads=None, unequal=False):
    """Sliced Wasserstein with uniform directions on the sphere of ``R^(c*d*d)``."""
    return _mc(mu, nu, "sw", p, L, rng, threads, unequal)


def csw(mu, nu, variant="stride", nonlinear=False, p=2, L=100, rng=42, threads=None,
        unequal=False):
    """Convolution sliced Wasserstein; ``nonlinear=True`` gives the sigmoid slicers."""
    variant = sl._normalize_variant(variant)
    suffix = {v: k for k, v in _VARIANT_SUFFIX.items()}[variant]
    method = ("ncsw-" if nonlinear else "csw-") + suffix
    return _mc(mu, nu, method, p, L, rng, threads, unequal)


# -- projected gradient ascent -----------------------------------------------

def _ascend(objective, params, retract, steps, lr):
    best, history = -np.inf, []
    for _ in range(steps):
        value, grads = objective(params)
        best = max(best, value)
        history.append(best)
        params = retract(tuple(w + lr * g for w, g in zip(params, grads)))
    value, _ = objective(params, need_grad=False)
    best = max(best, value)
    history.append(best)
    return best, history, params


def _chain_root(wpp, p):
    """``W_p`` and ``dW_p / dW_p^p``; the derivative is 0 where ``W_p = 0``."""
    w = wpp ** (1.0 / p)
    return w, (w / (p * wpp) if wpp > 0 else 0.0)


def _sorted_upstream(px, py, p):
    """``W_p`` between 1-D samples plus its gradients w.r.t. each sample."""
    n = px.shape[0]
    ox = np.argsort(px, kind="stable")
    oy = np.argsort(py, kind="stable")
    r = px[ox] - py[oy]
    wpp = float(np.mean(abs_pow(r, p)))
    w, scale = _chain_root(wpp, p)
    coef = scale * p * np.sign(r) * abs_pow(r, p - 1.0) / n
    gx, gy = np.empty(n), np.empty(n)
    gx[ox] = coef
    gy[oy] = -coef
    return w, gx, gy


def _matched_upstream(zx, zy, p):
    """``W_p`` between equal-size clouds in ``R^k`` (exact assignment) plus gradients."""
    n = zx.shape[0]
    cols, pair_costs = optimal_assignment(zx, zy, p)
    wpp = float(np.mean(np.sort(pair_costs)))
    w, scale = _chain_root(wpp, p)
    r = zx - zy[cols]
    coef = scale * p * np.sign(r) * abs_pow(r, p - 1.0) / n
    gy = np.empty_like(zy)
    gy[cols] = -coef
    return w, coef, gy


def _sorted_upstream_columns(zx, zy, p):
    w, gx, gy = _sorted_upstream(zx[:, 0], zy[:, 0], p)
    return w, gx[:, None], gy[:, None]


def _qr_retract(params):
    q, r = np.linalg.qr(params[0])
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return (q * signs,)


def _sphere_retract(params):
    theta = params[0]
    return (theta / np.sqrt(np.sum(theta * theta)),)


def _result(best, history, return_history):
    return (best, history) if return_history else best


def max_sw(mu, nu, p=2, steps=100, lr=0.01, rng=42, history=False):
    """Max-sliced Wasserstein over unit directions of ``R^(c*d*d)``."""
    p = _check_p(p)
    mu, nu = _pair(mu, nu)
    xf, yf = mu.reshape(mu.shape[0], -1), nu.reshape(nu.shape[0], -1)
    theta = sample_unit_tensor(mu.shape[1:], as_random_source(rng).substream(0)).ravel()

    def objective(params, need_grad=True):
        (t,) = params
        w, gx, gy = _sorted_upstream(xf @ t, yf @ t, p)
        return w, ((xf.T @ gx + yf.T @ gy),) if need_grad else None

    best, hist, _ = _ascend(objective, (theta,), _sphere_retract, steps, lr)
    return _result(best, hist, history)


def prw(mu, nu, k=2, p=2, steps=100, lr=0.01, rng=42, history=False):
    """Projected robust Wasserstein over orthonormal frames ``U`` of ``k`` columns."""
    p = _check_p(p)
    mu, nu = _pair(mu, nu)
    xf, yf = mu.reshape(mu.shape[0], -1), nu.reshape(nu.shape[0], -1)
    if k > xf.shape[1]:
        raise ShapeError(f"k={k} exceeds the ambient dimension {xf.shape[1]}")
    g0 = as_random_source(rng).substream(0).standard_normal((xf.shape[1], int(k)))
    frame = _qr_retract((g0,))

    def objective(params, need_grad=True):
        (u,) = params
        w, gzx, gzy = _matched_upstream(xf @ u, yf @ u, p)
        return w, ((xf.T @ gzx + yf.T @ gzy),) if need_grad else None

    best, hist, _ = _ascend(objective, frame, _qr_retract, steps, lr)
    return _result(best, hist, history)


def _slicer_ascent(mu, nu, variant, k, p, steps, lr, rng, nonlinear, upstream):
    p = _check_p(p)
    mu, nu = _pair(mu, nu)
    c, d, _ = mu.shape[1:]
    schedule = sl.make_schedule(variant, c, d, k, nonlinear)
    init = sl.sample_kernel_stack(schedule, as_random_source(rng).substream(0))

    def objective(params, need_grad=True):
        stack = sl.KernelStack(schedule, params)
        zx, tx = sl.forward(stack, mu)
        zy, ty = sl.forward(stack, nu)
        w, gx, gy = upstream(zx, zy, p)
        if not need_grad:
            return w, None
        dx = sl.backward(stack, tx, gx)
        dy = sl.backward(stack, ty, gy)
        return w, tuple(a + b for a, b in zip(dx, dy))

    return _ascend(objective, init.kernels, sl.renormalize, steps, lr)


def max_csw(mu, nu, variant="stride", p=2, steps=100, lr=0.01, rng=42, nonlinear=False,
            history=False):
    """Max convolution sliced Wasserstein: ascent over unit-norm kernel stacks."""
    best, hist, _ = _slicer_ascent(mu, nu, variant, 1, p, steps, lr, rng, nonlinear,
                                   _sorted_upstream_columns)
    return _result(best, hist, history)


def cprw(mu, nu, variant="stride", k=2, p=2, steps=100, lr=0.01, rng=42, history=False):
    """Convolution projected robust Wasserstein with a ``k``-channel slicer."""
    best, hist, _ = _slicer_ascent(mu, nu, variant, int(k), p, steps, lr, rng, False,
                                   _matched_upstream)
    return _result(best, hist, history)


# -- dispatch ----------------------------------------------------------------

def evaluate(spec, mu, nu, threads=None, unequal=False):
    """Compute the distance described by a :class:`MethodSpec`."""
    family, variant, nonlinear = parse_method(spec.method)
    if family in MONTE_CARLO:
        return _mc(mu, nu, spec.method, spec.p, spec.L, spec.seed, threads, unequal)
    if family == "max-sw":
        return max_sw(mu, nu, spec.p, spec.steps, spec.lr, spec.seed)
    if family == "max-csw":
        return max_csw(mu, nu, variant, spec.p, spec.steps, spec.lr, spec.seed, nonlinear)
    if family == "prw":
        return prw(mu, nu, spec.k, spec.p, spec.steps, spec.lr, spec.seed)
    if family == "cprw":
        return cprw(mu, nu, variant, spec.k, spec.p, spec.steps, spec.lr, spec.seed)
    mu, nu = _pair(mu, nu)
    return exact_wasserstein_assignment(mu, nu, spec.p)


def projection_param_count(spec, c, d):
    """Stored reals per slice: ``c*d*d`` for direction methods, kernel entries otherwise."""
    family, variant, nonlinear = parse_method(spec.method)
    if family in ("sw", "max-sw"):
        return c * d * d
    if family == "prw":
        return c * d * d * spec.k
    if family == "exact":
        return 0
    k = spec.k if family == "cprw" else 1
    return sl.make_schedule(variant, c, d, k, nonlinear).param_count


def projection_mac_count(spec, c, d):
    """Multiply-accumulates to slice one support."""
    family, variant, nonlinear = parse_method(spec.method)
    if family in ("sw", "max-sw", "prw"):
        return c * d * d * (spec.k if family == "prw" else 1)
    if family == "exact":
        return 0
    k = spec.k if family == "cprw" else 1
    return sl.make_schedule(variant, c, d, k, nonlinear).mac_count
