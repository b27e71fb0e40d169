import itertools

import numpy as np
import pytest

from convsw import _backend


@pytest.fixture(params=_backend.available_backends())
def backend(request):
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def naive_conv(x, kernel, s, b):
    """Literal 1-indexed transcription of the convolution sum (test oracle)."""
    c, d, _ = x.shape
    k = kernel.shape[1]
    dp = (d - b * (k - 1) - 1) // s + 1
    y = np.zeros((1, dp, dp))
    for i in range(1, dp + 1):
        for j in range(1, dp + 1):
            acc = 0.0
            for h in range(1, c + 1):
                for ip in range(k):
                    for jp in range(k):
                        acc += (x[h - 1, s * (i - 1) + b * ip, s * (j - 1) + b * jp]
                                * kernel[h - 1, ip, jp])
            y[0, i - 1, j - 1] = acc
    return y


def brute_force_wasserstein(x, y, p):
    """Minimum over all permutations of the mean matched ``||.||_p^p`` cost."""
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    n = x.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.sum(np.abs(x[i] - y[perm[i]]) ** p) for i in range(n)) / n
        best = min(best, cost)
    return best ** (1.0 / p)


def central_difference(f, params, h=1e-6):
    """Central finite differences of scalar ``f(list_of_arrays)`` per entry."""
    grads = []
    for idx in range(len(params)):
        g = np.zeros_like(params[idx])
        flat = g.reshape(-1)
        for e in range(flat.size):
            plus = [p.copy() for p in params]
            minus = [p.copy() for p in params]
            plus[idx].reshape(-1)[e] += h
            minus[idx].reshape(-1)[e] -= h
            flat[e] = (f(plus) - f(minus)) / (2 * h)
        grads.append(g)
    return grads


@pytest.fixture
def idx_dataset(tmp_path):
    """Three classes of 8x8 ubyte images: a class-specific blob plus noise."""
    gen = np.random.default_rng(7)
    images, labels = [], []
    for cls in range(3):
        template = np.zeros((8, 8))
        template[2 * cls:2 * cls + 3, 1:7] = 200
        for _ in range(40):
            images.append(np.clip(template + gen.normal(0, 25, (8, 8)), 0, 255))
            labels.append(cls)
    from convsw.dataio import write_idx_images, write_idx_labels
    img, lab = tmp_path / "images.idx", tmp_path / "labels.idx"
    write_idx_images(img, np.array(images).astype(np.uint8))
    write_idx_labels(lab, labels)
    return img, lab
