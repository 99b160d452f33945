import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractal_riesz.analysis import AllPairs, holder_seminorm
from fractal_riesz.measures import DiscreteMeasure, SampledField
from fractal_riesz.minimize import (
    InfeasibleProblemError,
    MinimizeOptions,
    PotentialCap,
    ProblemSpec,
    check_constraints,
    minimize,
    objective_and_gradient,
    project_holder,
)
from fractal_riesz.witness import feasible_init


def _self_problem(m=65, **kw):
    args = dict(alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=m)
    args.update(kw)
    return ProblemSpec("self", **args)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 0.7])
def test_gamma_range_enforced(gamma):
    # for n=2, alpha=0.5: k/(n - alpha) = 2/3
    with pytest.raises(InfeasibleProblemError):
        _self_problem(gamma=gamma)


def test_endpoint_only_for_curves():
    with pytest.raises(ValueError):
        ProblemSpec("self", alpha=2.5, gamma=0.5, rho=1.0, k=2, n=3, m=9, endpoint=[0.1, 0, 0])


def test_medium_required_for_mutual():
    with pytest.raises(ValueError):
        ProblemSpec("mutual", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=33)


def test_self_objective_scaling():
    problem = _self_problem()
    f = feasible_init(problem, seed=2)
    base, _, _ = objective_and_gradient(problem, f)
    for lam in (0.3, 2.0, 7.0):
        val, _, _ = objective_and_gradient(problem, f.scaled(lam))
        assert val == pytest.approx(lam ** (0.5 - 2) * base, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_self_objective_translation_invariant(shift):
    problem = _self_problem(m=33)
    f = feasible_init(problem, seed=1)
    moved = f.with_values(f.values + np.asarray(shift))
    v0, g0, _ = objective_and_gradient(problem, f)
    v1, g1, _ = objective_and_gradient(problem, moved)
    assert v1 == pytest.approx(v0, rel=1e-10)
    np.testing.assert_allclose(g1, g0, rtol=1e-8, atol=1e-10 * np.abs(g0).max())


def test_gradient_zero_at_pinned():
    problem = _self_problem(endpoint=[0.2, 0.1])
    f = feasible_init(problem, seed=0)
    _, g, _ = objective_and_gradient(problem, f)
    assert np.all(g[0] == 0.0) and np.all(g[-1] == 0.0)


def test_gradient_central_differences():
    rng = np.random.default_rng(0)
    medium = DiscreteMeasure(rng.uniform(-0.5, 0.5, (8, 2)) + 0.3, rng.random(8))
    for kind in ("self", "mutual", "p_potential"):
        problem = ProblemSpec(kind, alpha=1.2, gamma=0.6, rho=1.0, k=1, n=2, m=33,
                              medium=None if kind == "self" else medium, p_power=1.5)
        f = feasible_init(problem, seed=4)
        _, g, _ = objective_and_gradient(problem, f)
        x = f.values
        h = 1e-6
        for i, c in [(3, 0), (10, 1), (32, 0)]:
            xp, xm = x.copy(), x.copy()
            xp[i, c] += h
            xm[i, c] -= h
            fd = (objective_and_gradient(problem, f.with_values(xp))[0]
                  - objective_and_gradient(problem, f.with_values(xm))[0]) / (2 * h)
            assert fd == pytest.approx(g[i, c], rel=1e-4)


def test_coincident_samples_infinite():
    problem = _self_problem(m=5)
    vals = np.zeros((5, 2))
    value, g, infinite = objective_and_gradient(problem, SampledField(vals))
    assert infinite and value == math.inf and np.all(g == 0)


def test_projection_leaves_feasible_field():
    f = feasible_init(_self_problem(), seed=3)
    out = project_holder(f, 0.6, 1.0)
    np.testing.assert_array_equal(out.values, f.values)


def test_projection_of_zero_field():
    out = project_holder(SampledField(np.zeros((17, 2))), 0.5, 1.0)
    assert np.all(out.values == 0.0)


def test_projection_two_point_path():
    v = np.array([3.0, 4.0])
    out = project_holder(SampledField(np.array([[0.0, 0.0], v])), 0.5, 2.0)
    np.testing.assert_array_equal(out.values[0], [0.0, 0.0])
    np.testing.assert_allclose(out.values[1], 2.0 * v / np.linalg.norm(v) * (1 - 1e-10), rtol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**4), scale=st.floats(0.5, 20.0))
def test_projection_lands_in_ball(seed, scale):
    vals = scale * np.random.default_rng(seed).standard_normal((33, 2))
    vals[0] = 0
    out = project_holder(SampledField(vals), 0.6, 1.0)
    assert holder_seminorm(out, 0.6, AllPairs()) <= 1.0 * (1 + 1e-9)
    assert np.all(out.values[0] == 0.0)


def test_scaled_field_seminorm_scales():
    f = feasible_init(_self_problem(), seed=5)
    rep = check_constraints(_self_problem(), f)
    rep10 = check_constraints(_self_problem(), f.scaled(10.0))
    assert rep10["holder_seminorm"] == pytest.approx(10 * rep["holder_seminorm"], rel=1e-12)
    assert rep["feasible"] and not rep10["feasible"]


def test_potential_sup_infinite_through_atom():
    f = feasible_init(_self_problem(), seed=6)
    atom = f.values[10]
    medium = DiscreteMeasure([atom], [1.0])
    problem = ProblemSpec("mutual", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=65, medium=medium,
                          potential_cap=PotentialCap(10.0, [atom]))
    assert check_constraints(problem, f)["potential_sup"] == math.inf


def test_minimize_never_worse_than_init():
    problem = _self_problem(m=65)
    init = feasible_init(problem, seed=8)
    res = minimize(problem, init, MinimizeOptions(max_iters=20, seed=8))
    assert res.objective_value <= res.init_objective
    assert res.constraint_report["holder_seminorm"] <= 1.0 * (1 + 1e-9)


def test_minimize_bridge_keeps_endpoint():
    p = np.array([0.3, 0.2])
    problem = _self_problem(m=65, endpoint=p)
    res = minimize(problem, feasible_init(problem, seed=1), MinimizeOptions(max_iters=15, restarts=1))
    np.testing.assert_array_equal(res.field.values[-1], p)
    assert res.constraint_report["endpoint_error"] == 0.0
    assert res.constraint_report["feasible"]


def test_minimize_is_deterministic():
    problem = _self_problem(m=33)
    init = feasible_init(problem, seed=2)
    opts = MinimizeOptions(max_iters=10, restarts=1, seed=3)
    a = minimize(problem, init, opts)
    b = minimize(problem, init, opts)
    assert a.field.values.tobytes() == b.field.values.tobytes()


def test_problem_json_roundtrip(tmp_path):
    medium = DiscreteMeasure([[0.0, 1.0], [0.5, 0.5]], [0.5, 0.5])
    medium.to_csv(tmp_path / "nu.csv")
    cfg = {"objective": "mutual", "alpha": 0.5, "gamma": 0.6, "rho": 1, "k": 1, "n": 2, "m": 33,
           "medium_csv": "nu.csv", "cap_M": 50.0}
    problem = ProblemSpec.from_dict(cfg, base_dir=tmp_path)
    assert problem.potential_cap.M == 50.0
    np.testing.assert_array_equal(problem.potential_cap.eval_points, medium.atoms)
