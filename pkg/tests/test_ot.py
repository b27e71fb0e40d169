import numpy as np
import pytest
from scipy.optimize import linprog

from convsw.errors import CapacityError, ShapeError
from convsw.ot import (
    ASSIGNMENT_LIMIT, cost_matrix, exact_wasserstein_assignment, optimal_assignment,
    wasserstein1d_equal, wasserstein1d_general,
)

from conftest import brute_force_wasserstein


def lp_wasserstein(xv, xw, yv, yw, p):
    """Transport LP on the full coupling (test oracle)."""
    n, m = len(xv), len(yv)
    cost = np.abs(np.subtract.outer(xv, yv)) ** p
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        a_eq[n + j, j::m] = 1
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([xw, yw]), bounds=(0, None),
                  method="highs")
    return res.fun ** (1.0 / p)


def test_equal_examples():
    assert wasserstein1d_equal([0], [3], p=1) == 3.0
    assert wasserstein1d_equal([0, 2], [1, 3], p=2) == 1.0
    assert wasserstein1d_equal([4, 1, 1, 7], [7, 1, 4, 1]) == 0.0


def test_general_examples():
    assert wasserstein1d_general([0], [0, 2], p=1) == pytest.approx(1.0, abs=1e-15)
    assert wasserstein1d_general([0, 1], [1, 0], p=1, x_weights=[0.5, 0.5]) == 0.0
    assert wasserstein1d_general([3, -1, 2], [2, 3, -1], p=2) == 0.0


def test_assignment_examples(rng):
    assert exact_wasserstein_assignment([[0, 0], [2, 0]], [[1, 0], [3, 0]], p=2) == 1.0
    x = rng.standard_normal((9, 3))
    assert exact_wasserstein_assignment(x, x[rng.permutation(9)]) == 0.0


def test_assignment_matches_brute_force(rng):
    for p in (1, 2, 1.5):
        x, y = rng.standard_normal((2, 6, 3))
        assert abs(exact_wasserstein_assignment(x, y, p) - brute_force_wasserstein(x, y, p)) < 1e-10


def test_general_agrees_with_equal(rng):
    for _ in range(200):
        n = int(rng.integers(1, 40))
        x, y = rng.standard_normal((2, n))
        for p in (1, 2, 3.5):
            assert abs(wasserstein1d_general(x, y, p) - wasserstein1d_equal(x, y, p)) < 1e-12


def test_general_matches_lp(rng):
    for _ in range(60):
        n, m = rng.integers(1, 8, size=2)
        xv, yv = rng.normal(size=n), rng.normal(size=m)
        xw, yw = rng.random(n) + 0.1, rng.random(m) + 0.1
        xw, yw = xw / xw.sum(), yw / yw.sum()
        for p in (1, 2):
            got = wasserstein1d_general(xv, yv, p, xw, yw)
            assert abs(got - lp_wasserstein(xv, xw, yv, yw, p)) < 1e-7


def test_general_ties_and_duplicates():
    # a repeated atom is the same as one atom with the summed weight
    a = wasserstein1d_general([0, 0, 5], [1, 2, 3], 2)
    b = wasserstein1d_general([0, 5], [1, 2, 3], 2, x_weights=[2 / 3, 1 / 3])
    assert abs(a - b) < 1e-12


@pytest.mark.parametrize("p", [1, 2, 3])
def test_symmetry(p, rng):
    for _ in range(50):
        x, y = rng.standard_normal((2, 12))
        assert wasserstein1d_equal(x, y, p) == wasserstein1d_equal(y, x, p)
        assert abs(wasserstein1d_general(x, y[:7], p) - wasserstein1d_general(y[:7], x, p)) < 1e-12
        cx, cy = rng.standard_normal((2, 10, 3))
        assert exact_wasserstein_assignment(cx, cy, p) == exact_wasserstein_assignment(cy, cx, p)


def test_triangle(rng):
    for _ in range(300):
        a, b, c = rng.standard_normal((3, 15)) * rng.uniform(0.1, 3, size=(3, 1))
        for p in (1, 2):
            ac = wasserstein1d_equal(a, c, p)
            assert ac <= wasserstein1d_equal(a, b, p) + wasserstein1d_equal(b, c, p) + 1e-9


def test_identity_of_indiscernibles(rng):
    x = rng.standard_normal(20)
    y = x.copy()
    y[3] += 1e-9
    assert wasserstein1d_equal(x, y) > 0
    assert wasserstein1d_equal(x, x[::-1]) == 0


def test_scaling(rng):
    x, y = rng.standard_normal((2, 16, 2))
    for alpha in (-3.0, 0.25, 10.0):
        for p in (1, 2, 2.5):
            base = exact_wasserstein_assignment(x, y, p)
            assert abs(exact_wasserstein_assignment(alpha * x, alpha * y, p) - abs(alpha) * base) < 1e-10
            w = wasserstein1d_equal(x[:, 0], y[:, 0], p)
            assert abs(wasserstein1d_equal(alpha * x[:, 0], alpha * y[:, 0], p) - abs(alpha) * w) < 1e-10


def test_assignment_beats_random_permutations(rng):
    x, y = rng.standard_normal((2, 30, 4))
    cost = cost_matrix(x, y, 2.0)
    best = exact_wasserstein_assignment(x, y, 2) ** 2
    for _ in range(100):
        perm = rng.permutation(30)
        assert best <= cost[np.arange(30), perm].mean() + 1e-12


def test_assignment_equals_sorting_in_1d(rng):
    for _ in range(100):
        n = int(rng.integers(1, 65))
        x, y = rng.standard_normal((2, n))
        assert abs(exact_wasserstein_assignment(x, y) - wasserstein1d_equal(x, y)) < 1e-10


def test_tensor_clouds_flattened(rng):
    x, y = rng.standard_normal((2, 5, 1, 2, 2))
    assert exact_wasserstein_assignment(x, y) == exact_wasserstein_assignment(
        x.reshape(5, -1), y.reshape(5, -1))


def test_errors():
    with pytest.raises(ShapeError):
        wasserstein1d_equal([1, 2], [1])
    with pytest.raises(ValueError):
        wasserstein1d_equal([1], [1], p=0.5)
    with pytest.raises(ValueError):
        wasserstein1d_general([1], [1], p=0.9)
    with pytest.raises(ValueError):
        wasserstein1d_general([1, 2], [1], x_weights=[0.3, 0.3])
    with pytest.raises(ShapeError):
        exact_wasserstein_assignment(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        exact_wasserstein_assignment(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(ShapeError):
        exact_wasserstein_assignment(np.array([[np.nan]]), np.zeros((1, 1)))


def test_capacity_limit():
    n = ASSIGNMENT_LIMIT + 1
    with pytest.raises(CapacityError):
        optimal_assignment(np.zeros((n, 1)), np.zeros((n, 1)))
    cols, costs = optimal_assignment(np.arange(4.0), np.arange(4.0)[::-1])
    assert list(cols) == [3, 2, 1, 0] and np.all(costs == 0)
