"""Image tensors, empirical measures and reproducible random streams.

A tensor is a float64 array of shape ``(c, d, d)`` in row-major
``[channel][row][col]`` layout.  An empirical measure with ``n`` equally
weighted supports is stored as a single ``(n, c, d, d)`` array.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def as_tensor3(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != x.shape[2] or min(x.shape) < 1:
        raise ShapeError(f"expected a (c, d, d) tensor, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ShapeError("tensor contains non-finite entries")
    return x


def as_measure(x):
    """Validate supports of an empirical measure as an ``(n, c, d, d)`` array.

    A single ``(c, d, d)`` tensor is promoted to a one-support measure.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or x.shape[2] != x.shape[3] or min(x.shape[1:]) < 1:
        raise ShapeError(f"expected supports of shape (n, c, d, d), got {x.shape}")
    if x.shape[0] < 1:
        raise ShapeError("an empirical measure needs at least one support")
    if not np.all(np.isfinite(x)):
        raise ShapeError("measure contains non-finite entries")
    return x


def vectorize(x):
    """Row-major flattening of a ``(c, d, d)`` tensor to length ``c*d*d``."""
    return np.asarray(x, dtype=np.float64).reshape(-1)


def devectorize(v, shape):
    c, d1, d2 = shape
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != c * d1 * d2:
        raise ShapeError(f"vector of length {v.size} does not fit shape {shape}")
    return v.reshape(c, d1, d2)


@dataclass(frozen=True)
class RandomSource:
    """Counter-based family of generators.

    ``substream(i)`` depends only on ``(master_seed, i)``, so projections
    drawn from different substreams can be evaluated in any order or on any
    thread and still reproduce exactly.
    """

    master_seed: int = 42

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def substream(self, i):
        return np.random.default_rng(np.random.SeedSequence([int(self.master_seed), int(i)]))


def as_random_source(rng):
    if isinstance(rng, RandomSource):
        return rng
    return RandomSource(int(rng))


def sample_unit_tensor(shape, rng):
    """Uniform draw from the unit sphere of ``R^(c*k*k)``, reshaped to ``shape``.

    Normalised Gaussians; a zero draw (probability zero) is redrawn.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0 or min(shape) < 1:
        raise ShapeError(f"invalid kernel shape {shape}")
    while True:
        g = rng.standard_normal(shape)
        norm = np.sqrt(np.sum(g * g))
        if norm > 0.0:
            return g / norm
