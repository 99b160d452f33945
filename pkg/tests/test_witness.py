import math

import numpy as np
import pytest

from fractal_riesz.analysis import AllPairs, holder_seminorm
from fractal_riesz.minimize import InfeasibleProblemError, ProblemSpec
from fractal_riesz.witness import (
    KochSpec,
    assouad_condition,
    biholder_constants,
    feasible_init,
    koch_curve,
)

KOCH_GAMMA = math.log(3) / math.log(4)


def test_koch_endpoints_and_length():
    for level in (1, 3, 5):
        x = koch_curve(KochSpec(KOCH_GAMMA, level)).points()
        np.testing.assert_array_equal(x[0], [0.0, 0.0])
        np.testing.assert_allclose(x[-1], [1.0, 0.0], atol=1e-12)
        length = np.sum(np.linalg.norm(np.diff(x, axis=0), axis=1))
        assert length == pytest.approx(4 ** (level * (1 - KOCH_GAMMA)), rel=1e-10)


def test_koch_level_zero_segment():
    x = koch_curve(KochSpec(0.7, 0)).points()
    np.testing.assert_allclose(x, [[0, 0], [1, 0]])


def test_koch_rejects_overlapping_generator():
    with pytest.raises(ValueError, match="fractional Brownian"):
        KochSpec(0.5, 3)


def _exhaustive_ratio(curve, gamma, level):
    x = curve.points()
    step = (x.shape[0] - 1) // 4**level
    y = x[::step]
    t = np.linspace(0, 1, y.shape[0])
    i, j = np.triu_indices(y.shape[0], 1)
    r = np.linalg.norm(y[j] - y[i], axis=1) / (t[j] - t[i]) ** gamma
    return r.min(), r.max()


def test_biholder_ratio_level_seven():
    curve = koch_curve(KochSpec(KOCH_GAMMA, 7))
    lo, hi = biholder_constants(curve, KOCH_GAMMA)
    assert hi / lo <= 20
    # exhaustive scan over the level-5 nodes is covered by the estimate
    ex_lo, ex_hi = _exhaustive_ratio(curve, KOCH_GAMMA, 5)
    assert lo <= ex_lo * (1 + 1e-12) and hi >= ex_hi * (1 - 1e-12)


@pytest.mark.parametrize(
    "k, gamma, n, alpha, expected",
    [(1, 0.6, 2, 0.5, True), (1, 0.5, 2, 1.5, False), (2, 0.9, 3, 1.0, False)],
)
def test_assouad_condition(k, gamma, n, alpha, expected):
    assert assouad_condition(k, gamma, n, alpha) is expected


@pytest.mark.parametrize("k, n, m", [(1, 2, 257), (2, 3, 17)])
def test_feasible_init_inside_ball(k, n, m):
    problem = ProblemSpec("self", alpha=n - 0.5, gamma=0.4, rho=0.7, k=k, n=n, m=m)
    f = feasible_init(problem, seed=3)
    assert holder_seminorm(f, 0.4, AllPairs()) <= 0.7
    assert np.all(f.points()[0] == 0.0)


def test_feasible_init_bridge_endpoint_exact():
    p = np.array([0.3, -0.2])
    problem = ProblemSpec("self", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=129, endpoint=p)
    f = feasible_init(problem, seed=0)
    np.testing.assert_array_equal(f.values[-1], p)
    assert np.all(f.values[0] == 0.0)
    assert holder_seminorm(f, 0.6, AllPairs()) <= 1.0


def test_feasible_init_endpoint_outside_ball():
    problem = ProblemSpec("self", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=65, endpoint=[1.0, 0.5])
    with pytest.raises(InfeasibleProblemError):
        feasible_init(problem)
