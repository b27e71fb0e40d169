"""Exact Wasserstein distances for small or one-dimensional problems."""
import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CapacityError, ShapeError

ASSIGNMENT_LIMIT = 512


def _check_p(p):
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"order p must be >= 1, got {p}")
    return p


def abs_pow(x, p):
    """``|x|**p`` with exact products for p = 1, 2."""
    if p == 1.0:
        return np.abs(x)
    if p == 2.0:
        return x * x
    return np.abs(x) ** p


def sorted_costs(px, py, p):
    """Row-wise ``W_p^p`` between equal-size 1-D samples.

    ``px`` and ``py`` have shape ``(L, n)``; returns a length-L array.
    """
    sx = np.sort(px, axis=-1, kind="stable")
    sy = np.sort(py, axis=-1, kind="stable")
    return np.mean(abs_pow(sx - sy, p), axis=-1)


def wasserstein1d_equal(xs, ys, p=2):
    """``W_p`` between two uniform 1-D samples of equal size (sort and pair)."""
    p = _check_p(p)
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size != ys.size or xs.size == 0:
        raise ShapeError(f"need equal non-empty samples, got {xs.size} and {ys.size}")
    return float(sorted_costs(xs, ys, p)) ** (1.0 / p)


def _quantile_steps(values, weights):
    values = np.asarray(values, dtype=np.float64).ravel()
    if weights is None:
        weights = np.full(values.size, 1.0 / values.size)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if values.size == 0 or weights.shape != values.shape:
        raise ShapeError("values and weights must be non-empty and aligned")
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive and sum to 1")
    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(weights[order])
    cdf[-1] = 1.0
    return values[order], cdf


def wasserstein1d_general(x_values, y_values, p=2, x_weights=None, y_weights=None):
    """``W_p`` between weighted 1-D discrete measures via their quantile functions.

    The quantile functions are piecewise constant; the integral of
    ``|F^-1 - G^-1|^p`` is summed over the merged breakpoints.
    """
    p = _check_p(p)
    xv, xc = _quantile_steps(x_values, x_weights)
    yv, yc = _quantile_steps(y_values, y_weights)
    levels = np.union1d(xc, yc)
    widths = np.diff(levels, prepend=0.0)
    keep = widths > 0
    levels, widths = levels[keep], widths[keep]
    # quantile on (prev, level]: first breakpoint >= level
    qx = xv[np.minimum(np.searchsorted(xc, levels, side="left"), xv.size - 1)]
    qy = yv[np.minimum(np.searchsorted(yc, levels, side="left"), yv.size - 1)]
    return float(np.sum(widths * abs_pow(qx - qy, p))) ** (1.0 / p)


def _as_cloud(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        x = x.reshape(x.shape[0], -1)
    if x.shape[0] < 1 or not np.all(np.isfinite(x)):
        raise ShapeError("point cloud must be non-empty and finite")
    return x


def cost_matrix(x, y, p):
    diff = x[:, None, :] - y[None, :, :]
    return abs_pow(diff, p).sum(axis=-1)


def optimal_assignment(x, y, p=2):
    """Optimal matching between equal-size clouds; returns ``(cols, pair_costs)``."""
    p = _check_p(p)
    x, y = _as_cloud(x), _as_cloud(y)
    if x.shape != y.shape:
        raise ShapeError(f"clouds must have equal size and dimension, got {x.shape} and {y.shape}")
    if x.shape[0] > ASSIGNMENT_LIMIT:
        raise CapacityError(
            f"exact assignment supports at most {ASSIGNMENT_LIMIT} supports, got {x.shape[0]}")
    # solve in a canonical orientation: with tied optima (common for p = 1)
    # the two argument orders could otherwise pick different matchings
    if x.tobytes() > y.tobytes():
        back, back_costs = optimal_assignment(y, x, p)
        cols = np.empty_like(back)
        cols[back] = np.arange(back.size)
        costs = np.empty_like(back_costs)
        costs[back] = back_costs
        return cols, costs
    cost = cost_matrix(x, y, p)
    rows, cols = linear_sum_assignment(cost)
    return cols, cost[rows, cols]


def exact_wasserstein_assignment(x, y, p=2):
    """Exact ``W_p`` between uniform clouds of equal size, ground cost ``||.||_p^p``.

    Points may be given as ``(n, k)`` arrays or as stacks of tensors
    (flattened row-major).  Matched costs are summed in ascending order so
    the result does not depend on argument order.
    """
    p = _check_p(p)
    _, pair_costs = optimal_assignment(x, y, p)
    return float(np.mean(np.sort(pair_costs))) ** (1.0 / p)
