"""Discrete Riesz-energy minimization over Holder balls.

Fields are optimized by projected gradient descent: a gradient step on the
(penalized) discrete energy, a projection back into the Holder ball by
cyclic pairwise contraction, then re-pinning of the fixed grid values.
Optional annealing restarts perturb the best field found so far and descend
again. Only iterates satisfying every hard constraint are eligible as the
returned minimizer.
"""

from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from ._validation import check_positive_int, rng_for
from .analysis import AllPairs, holder_seminorm
from .measures import SampledField, grid_params
from .problems import InfeasibleProblemError, Objective, PotentialCap, ProblemSpec

__all__ = [
    "Objective",
    "PotentialCap",
    "ProblemSpec",
    "InfeasibleProblemError",
    "ProjectionError",
    "MinimizeOptions",
    "MinimizerResult",
    "objective_and_gradient",
    "holder_pairs",
    "project_holder",
    "check_constraints",
    "minimize",
    "energy_floor",
]

_BLOCK = 512
# potential penalty switches on at this fraction of the cap
_CAP_MARGIN = 0.95


class ProjectionError(RuntimeError):
    """Cyclic contraction did not reach the Holder ball."""


# ----------------------------------------------------------- objectives


def _pair_terms(xa, xb, beta):
    diff = xa[:, None, :] - xb[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    return diff, r2


def _self_energy_grad(x, w, beta):
    N = x.shape[0]
    value = 0.0
    grad = np.zeros_like(x)
    for start in range(0, N, _BLOCK):
        xa = x[start:start + _BLOCK]
        diff, r2 = _pair_terms(xa, x, beta)
        rows = np.arange(xa.shape[0])
        r2[rows, start + rows] = np.inf
        if np.any(r2 == 0.0):
            return np.inf, None
        rb = np.power(r2, 0.5 * beta)
        value += float(np.sum(rb))
        coef = beta * rb / r2
        grad[start:start + _BLOCK] = np.einsum("ij,ijk->ik", coef, diff)
    # each unordered pair contributes twice to the derivative of the ordered sum
    return w * w * value, 2.0 * w * w * grad


def _potentials_at(points, x, w, beta):
    """``U(e) = sum_i w |e - x_i|**beta`` and the per-pair data for gradients."""
    diff = points[:, None, :] - x[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore"):
        rb = np.power(r2, 0.5 * beta)
    return w * rb.sum(axis=1), diff, r2, rb


def _mutual_energy_grad(x, w, atoms, nu, beta):
    U, diff, r2, rb = _potentials_at(atoms, x, w, beta)
    if np.any(r2[nu > 0] == 0.0):
        return np.inf, None
    value = float(nu @ U)
    coef = (nu[:, None] * w * beta) * rb / np.where(r2 == 0.0, 1.0, r2)
    # d/dx_i of |b_j - x_i|^beta = beta r^(beta-2) (x_i - b_j) = -beta r^(beta-2) diff
    grad = -np.einsum("ji,jik->ik", coef, diff)
    return value, grad


def _ppower_energy_grad(x, w, atoms, nu, beta, p):
    U, diff, r2, rb = _potentials_at(atoms, x, w, beta)
    if np.any(r2[nu > 0] == 0.0):
        return np.inf, None
    value = float(nu @ U**p)
    outer = nu * p * U ** (p - 1.0)
    coef = (outer[:, None] * w * beta) * rb / np.where(r2 == 0.0, 1.0, r2)
    grad = -np.einsum("ji,jik->ik", coef, diff)
    return value, grad


def _raw_objective(problem, x):
    N = x.shape[0]
    w = 1.0 / N
    beta = problem.alpha - problem.n
    if problem.objective is Objective.SELF:
        return _self_energy_grad(x, w, beta)
    nu = problem.medium.weights
    atoms = problem.medium.atoms
    if problem.objective is Objective.MUTUAL:
        return _mutual_energy_grad(x, w, atoms, nu, beta)
    return _ppower_energy_grad(x, w, atoms, nu, beta, problem.p_power)


def objective_and_gradient(problem, field_):
    """Discrete objective and its exact gradient with respect to the grid values.

    Objectives, with ``w = m**-k`` and ``beta = alpha - n``:

    * self: ``sum_{i != j} w**2 |X_i - X_j|**beta``,
    * mutual: ``sum_i sum_j w nu_j |X_i - b_j|**beta``,
    * p_potential: ``sum_j nu_j (sum_i w |b_j - X_i|**beta)**p``.

    The gradient is zero at pinned grid values.

    Returns
    -------
    value : float
        ``+inf`` when two samples (or a sample and a positive medium atom)
        coincide.
    grad : ndarray
        Same shape as ``field_.values``; zeros when ``value`` is infinite.
    infinite : bool
    """
    _check_dims(problem, field_)
    x = field_.points()
    value, grad = _raw_objective(problem, x)
    if not np.isfinite(value):
        return np.inf, np.zeros_like(field_.values), True
    grad[problem.pinned_indices] = 0.0
    return value, grad.reshape(field_.values.shape), False


def _check_dims(problem, field_):
    if field_.k != problem.k or field_.n != problem.n or field_.m != problem.m:
        raise ValueError(
            f"field has (k, n, m) = {(field_.k, field_.n, field_.m)}, "
            f"problem expects {(problem.k, problem.n, problem.m)}"
        )


def _cap_potentials(problem, x):
    cap = problem.potential_cap
    w = 1.0 / x.shape[0]
    return _potentials_at(cap.eval_points, x, w, problem.alpha - problem.n)


def _penalty_and_grad(problem, x):
    """``sum_e max(0, U(e) - 0.95 M)**2`` and its gradient."""
    cap = problem.potential_cap
    U, diff, r2, rb = _cap_potentials(problem, x)
    if np.any(r2 == 0.0):
        return np.inf, np.zeros_like(x), U
    excess = np.maximum(U - _CAP_MARGIN * cap.M, 0.0)
    value = float(np.sum(excess**2))
    w = 1.0 / x.shape[0]
    beta = problem.alpha - problem.n
    coef = (2.0 * excess[:, None] * w * beta) * rb / r2
    grad = -np.einsum("ji,jik->ik", coef, diff)
    return value, grad, U


def energy_floor(problem):
    """Crude lower bound ``(1 - w) (2 rho k**(gamma/2))**(alpha - n)`` for the self objective.

    Every sample lies within ``rho k**(gamma/2)`` of the pinned origin, so
    all pair distances are at most twice that.
    """
    w = 1.0 / problem.m**problem.k
    return (1.0 - w) * (2.0 * problem.rho * problem.k ** (problem.gamma / 2.0)) ** (
        problem.alpha - problem.n
    )


# ----------------------------------------------------------- projection


def holder_pairs(k, m, gamma, rho, local_radius=8, long_range=1 << 14, seed=0):
    """Constraint pairs ``(a, b, bound)`` with ``bound = rho |t_a - t_b|**gamma``.

    All pairs for ``k = 1``. For ``k >= 2``, all pairs within ``local_radius``
    cells in every coordinate plus ``long_range`` seeded random pairs.
    """
    if k == 1:
        a, b = np.triu_indices(m, 1)
        lag = (b - a).astype(float) / (m - 1)
        return a.astype(np.int64), b.astype(np.int64), rho * lag**gamma
    t = grid_params(k, m)
    shape = (m,) * k
    N = m**k
    offs = np.stack(np.meshgrid(*([np.arange(-local_radius, local_radius + 1)] * k), indexing="ij"),
                    -1).reshape(-1, k)
    # keep one representative per unordered offset
    first = offs[np.any(offs != 0, axis=1)]
    sign = np.array([next((v for v in o if v != 0), 0) for o in first])
    offs = first[sign > 0]
    idx = np.stack(np.unravel_index(np.arange(N), shape), -1)
    A, B = [], []
    for o in offs:
        tgt = idx + o
        ok = np.all((tgt >= 0) & (tgt < m), axis=1)
        A.append(np.nonzero(ok)[0])
        B.append(np.ravel_multi_index(tuple(tgt[ok].T), shape))
    rng = np.random.default_rng(seed)
    ra = rng.integers(0, N, long_range)
    rb = rng.integers(0, N - 1, long_range)
    rb = rb + (rb >= ra)
    A.append(ra)
    B.append(rb)
    a = np.concatenate(A).astype(np.int64)
    b = np.concatenate(B).astype(np.int64)
    bound = rho * np.linalg.norm(t[a] - t[b], axis=1) ** gamma
    return a, b, bound


@numba.njit(cache=True)
def _contract_sweeps(x, a, b, bound, pinned, max_sweeps, shrink, slack):
    """Cyclic pairwise contraction. Returns (sweeps used, max relative violation, status).

    status 0: converged, 1: sweep limit, 2: violated pair with both ends pinned.
    """
    n = x.shape[1]
    P = a.shape[0]
    worst = 0.0
    for sweep in range(max_sweeps):
        worst = 0.0
        for q in range(P):
            i = a[q]
            j = b[q]
            dist2 = 0.0
            for c in range(n):
                d = x[j, c] - x[i, c]
                dist2 += d * d
            dist = np.sqrt(dist2)
            L = bound[q]
            if dist <= L * (1.0 + slack):
                continue
            rel = dist / L - 1.0 if L > 0 else np.inf
            if rel > worst:
                worst = rel
            target = L * (1.0 - shrink)
            excess = dist - target
            pi = pinned[i]
            pj = pinned[j]
            if pi and pj:
                return sweep, worst, 2
            if pi:
                fi, fj = 0.0, 1.0
            elif pj:
                fi, fj = 1.0, 0.0
            else:
                fi, fj = 0.5, 0.5
            scale = excess / dist
            for c in range(n):
                d = x[j, c] - x[i, c]
                x[i, c] += fi * scale * d
                x[j, c] -= fj * scale * d
        if worst == 0.0:
            return sweep + 1, 0.0, 0
    return max_sweeps, worst, 1


def project_holder(field_, gamma, rho, pinned=(0,), pairs=None, max_sweeps=200, seed=0):
    """Pull a field into the discrete Holder ball by cyclic pairwise contraction.

    Every violated pair ``(s, t)`` is moved symmetrically toward its
    midpoint until ``|X(t) - X(s)| <= rho |t - s|**gamma`` (aiming a hair
    inside the bound, so the sweeps terminate); a pinned value never moves
    and its partner absorbs the whole correction. Sweeps repeat until a
    sweep finds no violation. The result is a feasible point, not the
    nearest one.

    Parameters
    ----------
    pinned : sequence of int
        Flat grid indices that must not move.
    pairs : tuple of arrays, optional
        ``(a, b, bound)`` constraint pairs; default :func:`holder_pairs`.

    Raises
    ------
    ProjectionError
        After ``max_sweeps`` sweeps without convergence, or when a pair with
        both ends pinned is violated.
    """
    if pairs is None:
        pairs = holder_pairs(field_.k, field_.m, gamma, rho, seed=seed)
    a, b, bound = pairs
    x = np.ascontiguousarray(field_.points().copy())
    mask = np.zeros(x.shape[0], dtype=np.bool_)
    mask[np.asarray(pinned, dtype=np.int64)] = True
    sweeps, worst, status = _contract_sweeps(x, a, b, bound, mask, max_sweeps, 1e-10, 1e-12)
    if status == 2:
        raise InfeasibleProblemError("a Holder constraint between two pinned values is violated")
    if status == 1:
        raise ProjectionError(
            f"Holder projection did not converge in {max_sweeps} sweeps; "
            f"max relative violation {worst:.3e}"
        )
    return field_.with_values(x)


# ------------------------------------------------------------ constraints


def _holder_value(problem, field_):
    return holder_seminorm(field_, problem.gamma, AllPairs())


def check_constraints(problem, field_):
    """Constraint report for a candidate field.

    Keys: ``holder_seminorm`` (all grid pairs), ``potential_sup`` (over the
    cap's evaluation points, ``nan`` without a cap), ``endpoint_error``
    (``nan`` without an endpoint), ``origin_error`` and ``feasible``.
    """
    _check_dims(problem, field_)
    x = field_.points()
    report = {"holder_seminorm": _holder_value(problem, field_)}
    if problem.potential_cap is not None:
        U = _cap_potentials(problem, x)[0]
        report["potential_sup"] = float(np.max(U))
    else:
        report["potential_sup"] = float("nan")
    if problem.endpoint is not None:
        report["endpoint_error"] = float(np.linalg.norm(x[problem.m - 1] - problem.endpoint))
    else:
        report["endpoint_error"] = float("nan")
    report["origin_error"] = float(np.linalg.norm(x[0]))
    report["feasible"] = _is_feasible(problem, report)
    return report


def _is_feasible(problem, report):
    ok = report["holder_seminorm"] <= problem.rho * (1.0 + 1e-9) and report["origin_error"] == 0.0
    if problem.potential_cap is not None:
        ok = ok and report["potential_sup"] < problem.potential_cap.M
    if problem.endpoint is not None:
        ok = ok and report["endpoint_error"] == 0.0
    return bool(ok)


def _max_violation(problem, report):
    v = max(report["holder_seminorm"] / problem.rho - 1.0, 0.0)
    if problem.potential_cap is not None:
        v = max(v, report["potential_sup"] / problem.potential_cap.M - 1.0)
    return v


# ------------------------------------------------------------- optimizer


@dataclass
class MinimizeOptions:
    """Optimizer settings.

    ``step0`` defaults to ``0.1 rho m**-gamma``; steps are measured as the
    largest displacement of any single grid value. ``restarts`` annealing
    rounds start from the best field, add Gaussian noise of standard
    deviation ``temperature * rho * m**-gamma`` (temperature decaying
    geometrically from ``temperature0`` by ``cooling``) and descend again.
    """

    max_iters: int = 200
    step0: float = None
    armijo_sigma: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    step_growth: float = 2.0
    max_step_factor: float = 10.0
    rel_tol: float = 1e-10
    restarts: int = 0
    temperature0: float = 1.0
    cooling: float = 0.5
    penalty0: float = 1.0
    penalty_growth: float = 10.0
    max_sweeps: int = 200
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.max_iters, "max_iters")
        check_positive_int(self.restarts, "restarts", minimum=0)


@dataclass
class MinimizerResult:
    field: SampledField
    objective_value: float
    constraint_report: dict
    trace: list
    seed: int
    init_objective: float = float("nan")
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "objective_value": self.objective_value,
            "init_objective": self.init_objective,
            "constraint_report": self.constraint_report,
            "seed": self.seed,
            "notes": list(self.notes),
            "iterations": len(self.trace),
        }


class _State:
    """Mutable optimizer bookkeeping for one :func:`minimize` call."""

    def __init__(self, problem, options):
        self.problem = problem
        self.options = options
        self.best = None
        self.best_value = np.inf
        self.least_violating = (np.inf, None)
        self.trace = []
        self.iteration = 0
        self.penalty = 0.0

    def consider(self, field_, value):
        report = check_constraints(self.problem, field_)
        viol = _max_violation(self.problem, report)
        self.trace.append((self.iteration, float(value), float(viol)))
        if report["feasible"] and value < self.best_value:
            self.best, self.best_value = field_, float(value)
        elif not report["feasible"] and viol < self.least_violating[0]:
            self.least_violating = (viol, field_)
        return report


def _penalized(problem, x, lam):
    value, grad = _raw_objective(problem, x)
    if not np.isfinite(value):
        return np.inf, None, np.inf
    if problem.potential_cap is not None and lam > 0:
        pen, pgrad, _ = _penalty_and_grad(problem, x)
        if not np.isfinite(pen):
            return np.inf, None, np.inf
        return value + lam * pen, grad + lam * pgrad, value
    return value, grad, value


def _repin(problem, x):
    x[0] = 0.0
    if problem.endpoint is not None:
        x[problem.m - 1] = problem.endpoint


def _descend(state, x, pairs, pinned):
    problem, opt = state.problem, state.options
    step0 = opt.step0 if opt.step0 is not None else 0.1 * problem.rho * problem.m ** (-problem.gamma)
    step = step0
    shape = (problem.m,) * problem.k + (problem.n,)
    template = SampledField(np.zeros(shape))
    for _ in range(opt.max_iters):
        F, g, raw = _penalized(problem, x, state.penalty)
        if not np.isfinite(F):
            break
        g[pinned] = 0.0
        gmax = np.max(np.abs(g))
        if gmax == 0.0:
            break
        d = -g / gmax
        t = step
        accepted = None
        for _ in range(opt.max_backtracks):
            trial = x + t * d
            _repin(problem, trial)
            try:
                proj = project_holder(template.with_values(trial), problem.gamma, problem.rho,
                                      pinned, pairs, opt.max_sweeps)
            except ProjectionError:
                t *= opt.backtrack
                continue
            y = proj.points().copy()
            _repin(problem, y)
            Fy, _, raw_y = _penalized(problem, y, state.penalty)
            if np.isfinite(Fy) and Fy <= F + opt.armijo_sigma * float(np.sum(g * (y - x))):
                accepted = (y, Fy, raw_y, t)
                break
            t *= opt.backtrack
        if accepted is None:
            break
        y, Fy, raw_y, t = accepted
        state.iteration += 1
        report = state.consider(template.with_values(y), raw_y)
        if problem.potential_cap is not None:
            if report["potential_sup"] >= _CAP_MARGIN * problem.potential_cap.M:
                state.penalty = max(state.penalty, 1e-300) * opt.penalty_growth
        rel = (F - Fy) / max(abs(F), 1e-300)
        x = y
        step = min(t * opt.step_growth, opt.max_step_factor * step0)
        if rel < opt.rel_tol:
            break
    return x


def minimize(problem, init, options=None):
    """Projected-gradient minimization of the discrete objective over the Holder ball.

    Parameters
    ----------
    problem : ProblemSpec
    init : SampledField
        A feasible starting field, e.g. from :func:`fractal_riesz.witness.feasible_init`.
    options : MinimizeOptions, optional

    Returns
    -------
    MinimizerResult
        The best feasible iterate (earliest on ties). ``trace`` lists
        ``(iteration, objective, max_violation)`` starting with the
        initializer at iteration 0.

    Raises
    ------
    InfeasibleProblemError
        If no iterate satisfied every hard constraint; the message reports the
        least violation seen.
    """
    options = options or MinimizeOptions()
    _check_dims(problem, init)
    pinned = problem.pinned_indices
    pairs = holder_pairs(problem.k, problem.m, problem.gamma, problem.rho, seed=options.seed)
    state = _State(problem, options)

    x0 = init.points().copy()
    init_value, _ = _raw_objective(problem, x0)
    state.consider(init, init_value)
    if problem.potential_cap is not None:
        M = problem.potential_cap.M
        state.penalty = options.penalty0 * max(abs(init_value), 1e-12) / (M * M)

    x = _descend(state, x0, pairs, pinned)
    rng = rng_for(options.seed, 1)
    for r in range(options.restarts):
        temp = options.temperature0 * options.cooling**r
        start = state.best.points().copy() if state.best is not None else x.copy()
        noise = rng.standard_normal(start.shape) * temp * problem.rho * problem.m ** (-problem.gamma)
        noise[pinned] = 0.0
        trial = start + noise
        _repin(problem, trial)
        try:
            proj = project_holder(init.with_values(trial), problem.gamma, problem.rho, pinned,
                                  pairs, options.max_sweeps)
        except ProjectionError:
            continue
        y = proj.points().copy()
        _repin(problem, y)
        state.iteration += 1
        value, _ = _raw_objective(problem, y)
        state.consider(init.with_values(y), value)
        x = _descend(state, y, pairs, pinned)

    if state.best is None:
        viol = state.least_violating[0]
        raise InfeasibleProblemError(
            f"no feasible iterate found; least max violation {viol:.3e}"
        )
    best = state.best
    best.meta.update({"objective": problem.objective.value, "seed": options.seed})
    report = check_constraints(problem, best)
    return MinimizerResult(
        field=best,
        objective_value=state.best_value,
        constraint_report=report,
        trace=state.trace,
        seed=options.seed,
        init_objective=float(init_value),
        notes=[f"options: {asdict(options)}"],
    )
