"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (printed in the pytest terminal
summary) and asserts the criterion at its stated tolerance and runtime.
"""

import math
import time

import numpy as np
import pytest

from fractal_riesz.analysis import box_dimension
from fractal_riesz.composition import (
    BVGridFunction,
    CompositionParams,
    ParameterGateError,
    gradient_measure,
    verify_main_estimate,
)
from fractal_riesz.constants import berman_C, m0_bound, m1_bound, pitt_condition
from fractal_riesz.fields import (
    CovKind,
    CovModel,
    FieldSpec,
    bridge_increment_variance,
    make_bridge,
    sample_fbf,
    sample_paths,
)
from fractal_riesz.measures import (
    Diagonal,
    DiscreteMeasure,
    SampledField,
    diagnostic_frequencies,
    fourier_transform,
    maximal_function,
    occupation_measure,
    riesz_potential,
    self_energy,
    sup_potential,
)
from fractal_riesz.minimize import (
    MinimizeOptions,
    PotentialCap,
    ProblemSpec,
    check_constraints,
    minimize,
    objective_and_gradient,
)
from fractal_riesz.witness import KochSpec, biholder_constants, feasible_init, koch_curve


def _record(log, number, title, passed, detail):
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    log.append(line)
    print(line)


def _random_pairs(m, count, seed):
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        i, j = sorted(rng.integers(0, m, size=2))
        if i != j:
            pairs.append((i, j))
    return np.array(pairs)


# ---------------------------------------------------------------- 1


@pytest.mark.slow
def test_criterion_01_fbm_covariance(acceptance_log):
    start = time.perf_counter()
    m, N = 1025, 2000
    pairs = _random_pairs(m, 20, seed=101)
    t = np.linspace(0.0, 1.0, m)
    worst_var, worst_m4 = 0.0, 0.0
    for H in (0.3, 0.5, 0.7):
        paths = sample_paths(FieldSpec(H, 1, 1, m, seed=2024), N)[..., 0]
        d = paths[:, pairs[:, 1]] - paths[:, pairs[:, 0]]
        lag = t[pairs[:, 1]] - t[pairs[:, 0]]
        var = np.mean(d**2, axis=0)
        m4 = np.mean(d**4, axis=0)
        worst_var = max(worst_var, float(np.max(np.abs(var / lag ** (2 * H) - 1))))
        # one component (n = 1), so the Gaussian fourth moment is 3 |t-s|^4H
        worst_m4 = max(worst_m4, float(np.max(np.abs(m4 / (3 * lag ** (4 * H)) - 1))))
    elapsed = time.perf_counter() - start
    ok = worst_var <= 0.07 and worst_m4 <= 0.12 and elapsed < 120
    _record(acceptance_log, 1, "fBm covariance fidelity", ok,
            f"max rel err var {worst_var:.3%}, 4th moment {worst_m4:.3%}, {elapsed:.1f}s")
    assert worst_var <= 0.07
    assert worst_m4 <= 0.12
    assert elapsed < 120


# ---------------------------------------------------------------- 2


@pytest.mark.slow
def test_criterion_02_bridge(acceptance_log):
    start = time.perf_counter()
    m, N = 1025, 2000
    pairs = _random_pairs(m, 20, seed=202)
    t = np.linspace(0.0, 1.0, m)
    pinned = True
    worst = 0.0
    for H in (0.3, 0.5, 0.7):
        spec = FieldSpec(H, 1, 1, m, seed=4048)
        vals = np.empty((N, m))
        for i in range(N):
            b = make_bridge(sample_fbf(spec, i), H).values[:, 0]
            pinned &= b[0] == 0.0 and b[-1] == 0.0
            vals[i] = b
        d = vals[:, pairs[:, 1]] - vals[:, pairs[:, 0]]
        emp = np.mean(d**2, axis=0)
        exact = np.array([bridge_increment_variance(t[i], t[j], H) for i, j in pairs])
        worst = max(worst, float(np.max(np.abs(emp / exact - 1))))
    elapsed = time.perf_counter() - start
    ok = pinned and worst <= 0.07 and elapsed < 120
    _record(acceptance_log, 2, "bridge pinning and variance", ok,
            f"ends exactly 0: {pinned}, max rel err {worst:.3%}, {elapsed:.1f}s")
    assert pinned
    assert worst <= 0.07
    assert elapsed < 120


# ---------------------------------------------------------------- 3


def test_criterion_03_energy_oracle(acceptance_log):
    start = time.perf_counter()
    m, alpha = 2048, 1.5
    line = SampledField.from_function(lambda t: np.c_[t[:, 0], np.zeros(len(t))], 1, 2, m)
    mu = occupation_measure(line)
    target = 8.0 / 3.0
    e_mid = self_energy(mu, alpha, Diagonal.CELL_MIDPOINT)
    e_exc = self_energy(mu, alpha, Diagonal.EXCLUDE)
    err_mid = abs(e_mid / target - 1)
    err_exc = abs(e_exc / target - 1)
    base_field = sample_fbf(FieldSpec(0.7, 1, 2, 513, seed=3))
    base = self_energy(occupation_measure(base_field), alpha)
    homo = max(
        abs(self_energy(occupation_measure(base_field.scaled(lam)), alpha) / (lam ** (alpha - 2) * base) - 1)
        for lam in (0.5, 2.0, 10.0)
    )
    elapsed = time.perf_counter() - start
    ok = err_mid <= 0.02 and homo <= 1e-10 and elapsed < 60
    _record(acceptance_log, 3, "energy oracle", ok,
            f"cell-midpoint rel err {err_mid:.3%} (exclude rule {err_exc:.3%}), "
            f"homogeneity {homo:.1e}, {elapsed:.1f}s")
    assert err_mid <= 0.02
    assert homo <= 1e-10
    assert elapsed < 60


# ---------------------------------------------------------------- 4


def test_criterion_04_potential_oracles(acceptance_log):
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    dirac_err = 0.0
    for n in (1, 2, 3):
        alpha = 0.5 * n
        x = rng.standard_normal((50, n))
        val = riesz_potential(DiscreteMeasure.dirac(np.zeros(n)), x, alpha)
        exact = np.linalg.norm(x, axis=1) ** (alpha - n)
        dirac_err = max(dirac_err, float(np.max(np.abs(val / exact - 1))))
    seg = occupation_measure(SampledField.from_function(lambda t: np.c_[t[:, 0], np.zeros(len(t))], 1, 2, 10**4))
    seg_val = riesz_potential(seg, [0.5, 0.0], 1.5)
    seg_err = abs(seg_val / (2 * math.sqrt(2)) - 1)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        alpha = rng.uniform(0.1, n - 0.1)
        atoms = rng.uniform(-1, 1, (int(rng.integers(1, 40)), n))
        mu = DiscreteMeasure(atoms, rng.random(atoms.shape[0]))
        x = rng.uniform(-5, 5, n)
        R = float(np.min(np.linalg.norm(atoms - x, axis=1)))
        if riesz_potential(mu, x, alpha) > mu.mass * R ** (alpha - n) * (1 + 1e-12):
            violations += 1
    elapsed = time.perf_counter() - start
    ok = dirac_err <= 1e-13 and seg_err <= 0.01 and violations == 0 and elapsed < 60
    _record(acceptance_log, 4, "potential oracles", ok,
            f"dirac max rel err {dirac_err:.1e}, segment rel err {seg_err:.3%}, "
            f"far-field violations {violations}/100, {elapsed:.1f}s")
    assert dirac_err <= 1e-13
    assert seg_err <= 0.01
    assert violations == 0


# ---------------------------------------------------------------- 5


def test_criterion_05_constants(acceptance_log):
    start = time.perf_counter()
    args = dict(n=2, alpha=1.5, H=0.5, eps=0.5, k=1)
    errs = {}
    C = berman_C(**args)
    C_mc = berman_C(**args, method="mc", samples=2 * 10**6, seed=5)
    errs["C"] = abs(C.value / C_mc.value - 1)
    M0 = m0_bound(**args)
    M0_mc = m0_bound(**args, method="mc", samples=2 * 10**6, seed=5)
    errs["M0"] = abs(M0.value / M0_mc.value - 1)
    M1 = m1_bound(**args, ell=8)
    # independent route: Monte-Carlo M0 plus n^(l/2) (l-1)!! (k^(lH/2) + 1), with
    # (l-1)!! = l! / (2^(l/2) (l/2)!)
    ell = 8
    dfact = math.factorial(ell) / (2 ** (ell // 2) * math.factorial(ell // 2))
    moment = args["n"] ** (ell / 2) * dfact * (args["k"] ** (ell * args["H"] / 2) + 1)
    errs["M1"] = abs(M1.value / (M0_mc.value + moment) - 1)
    anchors = abs(C.value - 41.4) < 0.05 and abs(M0.value - 1.77) < 0.005 and abs(M1.value - 3361.8) < 0.05
    cov = CovModel(CovKind.FBF, 0.5, 1)
    pitt = pitt_condition(cov, 2, 1.5, 0.1, 1)
    closed = 2 * 0.5**0.55 / 0.55
    errs["pitt"] = abs(pitt.value / closed - 1)
    elapsed = time.perf_counter() - start
    ok = max(errs["C"], errs["M0"], errs["M1"]) <= 0.01 and errs["pitt"] <= 0.005 and anchors and elapsed < 60
    _record(acceptance_log, 5, "constants table", ok,
            f"C {C.value:.4f}, M0 {M0.value:.4f}, M1 {M1.value:.2f}; "
            + ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + f", {elapsed:.1f}s")
    assert anchors
    assert max(errs["C"], errs["M0"], errs["M1"]) <= 0.01
    assert errs["pitt"] <= 0.005
    assert elapsed < 60


# ---------------------------------------------------------------- 6


def test_criterion_06_koch(acceptance_log):
    start = time.perf_counter()
    gamma = math.log(3) / math.log(4)
    curve = koch_curve(KochSpec(gamma, 8))
    dim = box_dimension(curve.points()).estimate
    lo, hi = biholder_constants(curve, gamma)
    target = math.log(4) / math.log(3)
    elapsed = time.perf_counter() - start
    ok = abs(dim - target) <= 0.1 and hi / lo <= 20 and elapsed < 60
    _record(acceptance_log, 6, "Koch geometry", ok,
            f"box dimension {dim:.4f} (target {target:.4f}), bi-Holder ratio {hi / lo:.2f}, {elapsed:.1f}s")
    assert abs(dim - target) <= 0.1
    assert hi / lo <= 20
    assert elapsed < 60


# ---------------------------------------------------------------- 7


@pytest.mark.slow
def test_criterion_07_minimization_sandwich(acceptance_log):
    start = time.perf_counter()
    problem = ProblemSpec("self", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=257)
    init = feasible_init(problem, seed=1)
    res = minimize(problem, init, MinimizeOptions(restarts=5, seed=1))
    rep = res.constraint_report
    dim = box_dimension(res.field.points(), polyline=True).estimate
    elapsed = time.perf_counter() - start
    feasible = rep["holder_seminorm"] <= problem.rho * (1 + 1e-9)
    ok = feasible and res.objective_value <= res.init_objective and 1.35 <= dim <= 1.817 and elapsed < 600
    _record(acceptance_log, 7, "minimization sandwich", ok,
            f"holder {rep['holder_seminorm']:.12f}, energy {res.init_objective:.4g} -> "
            f"{res.objective_value:.4g}, box dimension {dim:.3f}, {elapsed:.1f}s")
    assert feasible
    assert res.objective_value <= res.init_objective
    assert 1.35 <= dim <= 1.817
    assert elapsed < 600


# ---------------------------------------------------------------- 8


@pytest.mark.slow
def test_criterion_08_constrained_medium(acceptance_log):
    start = time.perf_counter()
    # uniform measure on the segment {0} x [-1, 1] through the origin, 64 midpoints
    y = -1.0 + (np.arange(64) + 0.5) / 32.0
    medium = DiscreteMeasure(np.c_[np.zeros(64), y], np.full(64, 1.0 / 64))
    base = ProblemSpec("mutual", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=257, medium=medium)
    init = feasible_init(base, seed=0)
    init_sup = sup_potential(occupation_measure(init), medium.atoms, 0.5)
    cap = PotentialCap(2.0 * init_sup, medium.atoms)
    problem = ProblemSpec("mutual", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=257,
                          medium=medium, potential_cap=cap)
    res = minimize(problem, init, MinimizeOptions(restarts=3, seed=0))
    rep = res.constraint_report
    elapsed = time.perf_counter() - start
    ok = (rep["feasible"] and rep["potential_sup"] < cap.M
          and res.objective_value <= res.init_objective and elapsed < 600)
    _record(acceptance_log, 8, "constrained medium problem", ok,
            f"feasible {rep['feasible']}, potential sup {rep['potential_sup']:.4g} < M={cap.M:.4g}, "
            f"mutual energy {res.init_objective:.4g} -> {res.objective_value:.4g}, {elapsed:.1f}s")
    assert rep["feasible"]
    assert rep["potential_sup"] < cap.M
    assert res.objective_value <= res.init_objective
    assert elapsed < 600


# ---------------------------------------------------------------- 9

_BOX = ([-2.013, -2.029], [1.987, 1.971])  # lattice offset so no sample sits on a face


def _composition_corpus(m, count=50, seed=909):
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(count):
        c = rng.uniform(-0.3, 0.3, 2)
        r = rng.uniform(0.3, 0.7)
        kind = i % 4
        if kind == 0:
            phi = BVGridFunction.disc_indicator(c, r, *_BOX, (64, 64))
        elif kind == 1:
            phi = BVGridFunction.square_indicator(c - r, c + r, *_BOX, (64, 64))
        elif kind == 2:
            phi = BVGridFunction.from_function(
                lambda p: np.clip((r - np.linalg.norm(p - c, axis=1)) / 0.2 + 0.5, 0, 1), *_BOX, (64, 64))
        else:
            phi = BVGridFunction.from_function(
                lambda p: np.exp(-np.sum((p - c) ** 2, axis=1) / r**2), *_BOX, (64, 64))
        if i % 2 == 0:
            # fBm with H > theta; the coarse grid is a subsample of the fine one
            fine = sample_fbf(FieldSpec(0.8, 1, 2, 2049, seed=i)).values
            vals = fine[:: 2048 // (m - 1)]
        else:
            a = rng.uniform(0.5, 1.5, 2)
            w = rng.uniform(1, 4, 2)
            vals = SampledField.from_function(
                lambda t: np.c_[a[0] * np.sin(w[0] * t[:, 0]), a[1] * (1 - np.cos(w[1] * t[:, 0]))],
                1, 2, m).values
        corpus.append((phi, SampledField(vals)))
    return corpus


@pytest.mark.slow
def test_criterion_09_composition(acceptance_log):
    start = time.perf_counter()
    params = CompositionParams(s=0.5, theta=0.6, p=2, q=4, r=1.5, beta=0.25)
    maxima, all_finite = [], True
    for m in (513, 1025):
        ratios = [verify_main_estimate(phi, u, params)["ratio"] for phi, u in _composition_corpus(m)]
        all_finite &= bool(np.all(np.isfinite(ratios)))
        maxima.append(max(ratios))
    drift = abs(maxima[1] / maxima[0] - 1)
    try:
        CompositionParams(s=0.5, theta=0.6, p=2, q=4, r=2, beta=0.25)
        rejected = False
    except ParameterGateError:
        rejected = True
    rng = np.random.default_rng(99)
    phi = BVGridFunction.disc_indicator([0.1, -0.05], 0.8, *_BOX, (64, 64))
    G = gradient_measure(phi)
    bound_ok = True
    for _ in range(200):
        x = rng.uniform(-1.5, 1.5, 2)
        R = rng.uniform(0.01, 2.0)
        bound_ok &= maximal_function(G, x, 0.5, R) <= riesz_potential(G, x, 0.5) * (1 + 1e-12)
    elapsed = time.perf_counter() - start
    ok = all_finite and drift <= 0.2 and rejected and bound_ok and elapsed < 300
    _record(acceptance_log, 9, "composition estimate", ok,
            f"max ratio {maxima[0]:.4f} (m=513) vs {maxima[1]:.4f} (m=1025), drift {drift:.2%}, "
            f"all finite {all_finite}, r=2 rejected {rejected}, maximal bound {bound_ok}, {elapsed:.1f}s")
    assert all_finite
    assert drift <= 0.2
    assert rejected
    assert bound_ok
    assert elapsed < 300


# ---------------------------------------------------------------- 10


def _objective_longdouble(kind, x, atoms, nu, alpha, n, p=2.0):
    """Objectives evaluated independently in extended precision."""
    x = x.astype(np.longdouble)
    beta = np.longdouble(alpha - n)
    w = np.longdouble(1) / x.shape[0]
    if kind == "self":
        d = np.sqrt(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1))
        np.fill_diagonal(d, 1)
        k = d**beta
        np.fill_diagonal(k, 0)
        return w * w * np.sum(k)
    d = np.sqrt(np.sum((atoms.astype(np.longdouble)[:, None, :] - x[None, :, :]) ** 2, axis=-1))
    U = w * np.sum(d**beta, axis=1)
    nu = nu.astype(np.longdouble)
    return np.sum(nu * U) if kind == "mutual" else np.sum(nu * U ** np.longdouble(p))


def test_criterion_10_gradients(acceptance_log):
    start = time.perf_counter()
    rng = np.random.default_rng(1010)
    medium = DiscreteMeasure(rng.uniform(-0.5, 0.5, (16, 2)) + [0.3, 0.2], rng.random(16))
    h = 1e-6
    worst = {}
    for kind in ("self", "mutual", "p_potential"):
        problem = ProblemSpec(kind, alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=65,
                              medium=None if kind == "self" else medium, p_power=2.0)
        field_ = feasible_init(problem, seed=7)
        _, grad, _ = objective_and_gradient(problem, field_)
        x = field_.points()
        errs = []
        for idx in rng.choice(np.arange(2, 2 * 65), size=20, replace=False):
            i, c = divmod(int(idx), 2)
            xp, xm = x.copy(), x.copy()
            xp[i, c] += h
            xm[i, c] -= h
            fp = _objective_longdouble(kind, xp, medium.atoms, medium.weights, 0.5, 2)
            fm = _objective_longdouble(kind, xm, medium.atoms, medium.weights, 0.5, 2)
            fd = float((fp - fm) / (2 * np.longdouble(h)))
            errs.append(abs(fd - grad[i, c]) / abs(grad[i, c]))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-5 and elapsed < 60
    _record(acceptance_log, 10, "gradient correctness", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")
    assert max(worst.values()) < 1e-5
    assert elapsed < 60


# ---------------------------------------------------------------- 11


def test_criterion_11_weak_convergence(acceptance_log):
    start = time.perf_counter()

    def lipschitz(t):
        s = t[:, 0]
        return np.c_[np.sin(2 * np.pi * s) / 4 + s, s**2 - 0.5 * s]

    xi = diagnostic_frequencies(2, count=32)
    ms = [2**j + 1 for j in (10, 11, 12)]
    hats = [fourier_transform(occupation_measure(SampledField.from_function(lipschitz, 1, 2, m)), xi)
            for m in ms]
    d1 = np.abs(hats[0] - hats[1])
    d2 = np.abs(hats[1] - hats[2])
    ratio = d2 / d1
    elapsed = time.perf_counter() - start
    ok = bool(np.all(ratio <= 0.6)) and elapsed < 60
    _record(acceptance_log, 11, "weak-convergence surrogate", ok,
            f"difference ratio max {ratio.max():.4f}, median {np.median(ratio):.4f} at 32 frequencies, {elapsed:.1f}s")
    assert np.all(ratio <= 0.6)
    assert elapsed < 60
