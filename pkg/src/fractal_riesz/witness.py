"""Feasibility witnesses: Koch-type curves and rescaled fractional fields.

A self-similar Koch-type curve with four maps of ratio ``4**-gamma`` is
bi-Holder of order ``gamma`` with respect to its quaternary parametrization.
For ``gamma <= 1/2`` that generator overlaps itself, and the witness is a
fractional Brownian field rescaled into the Holder ball instead.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .analysis import AllPairs, Sampled, holder_seminorm
from .fields import FieldSpec, make_bridge, sample_fbf
from .measures import SampledField
from .problems import InfeasibleProblemError

__all__ = [
    "KochSpec",
    "koch_curve",
    "koch_generator",
    "biholder_constants",
    "assouad_condition",
    "feasible_init",
    "witness_holder_constant",
]

MAX_KOCH_LEVEL = 9


@dataclass(frozen=True)
class KochSpec:
    gamma: float
    level: int
    n: int = 2

    def __post_init__(self):
        if not (0.5 < self.gamma < 1.0):
            raise ValueError(
                f"Koch witness needs gamma in (1/2, 1), got {self.gamma}; "
                "for smaller gamma use the fractional Brownian witness (feasible_init)"
            )
        check_positive_int(self.level, "level", minimum=0)
        if self.level > MAX_KOCH_LEVEL:
            raise ValueError(f"level must be <= {MAX_KOCH_LEVEL}, got {self.level}")
        if self.n != 2:
            raise ValueError("the Koch construction is planar (n = 2)")


def koch_generator(gamma):
    """Vertices ``0, r, apex, 1 - r, 1`` of the generator as complex numbers.

    All four segments have length ``r = 4**-gamma``; the apex height solves
    ``(1/2 - r)**2 + height**2 = r**2``.
    """
    r = 4.0 ** (-gamma)
    height = math.sqrt(r * r - (0.5 - r) ** 2)
    return np.array([0.0, r, 0.5 + 1j * height, 1.0 - r, 1.0])


def koch_curve(spec):
    """Level-``level`` polygon of the Koch-type curve as a sampled field.

    Grid index ``i`` corresponds to ``t = i / 4**level`` and the curve runs
    from ``0`` to ``(1, 0)``.
    """
    gen = koch_generator(spec.gamma)
    pts = np.array([0.0 + 0j, 1.0 + 0j])
    for _ in range(spec.level):
        a = pts[:-1, None]
        d = (pts[1:] - pts[:-1])[:, None]
        pieces = a + d * gen[None, :4]
        pts = np.concatenate([pieces.ravel(), pts[-1:]])
    vals = np.stack([pts.real, pts.imag], axis=1)
    vals[0] = 0.0
    return SampledField(vals, {"witness": "koch", "gamma": spec.gamma, "level": spec.level})


def biholder_constants(field_, gamma, coarse_nodes=1025, local_lag=64):
    """Smallest and largest ``|X(t) - X(s)| / |t - s|**gamma`` on a pair set.

    The pair set is every pair among ``coarse_nodes`` evenly strided grid
    nodes (for a Koch level-``L`` curve and ``coarse_nodes = 4**j + 1`` these
    are the quaternary level-``j`` nodes) together with all pairs whose
    index lag is at most ``local_lag``.
    """
    x = field_.points()
    m = x.shape[0]
    h = 1.0 / (m - 1)
    stride = max((m - 1) // (coarse_nodes - 1), 1)
    lo, hi = np.inf, 0.0

    def scan(y, spacing, max_lag):
        nonlocal lo, hi
        for lag in range(1, min(max_lag, y.shape[0] - 1) + 1):
            r = np.linalg.norm(y[lag:] - y[:-lag], axis=1) / (lag * spacing) ** gamma
            lo = min(lo, float(r.min()))
            hi = max(hi, float(r.max()))

    coarse = x[::stride]
    scan(coarse, stride * h, coarse.shape[0] - 1)
    scan(x, h, local_lag)
    return lo, hi


def assouad_condition(k, gamma, n, alpha):
    """``k (floor(1/gamma) + 1) <= n < k/gamma + alpha``."""
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not (0.0 < alpha < n):
        raise ValueError(f"alpha must lie in (0, n), got {alpha}")
    inv = 1.0 / gamma
    # guard floor against 1/gamma landing a hair below an integer
    fl = math.floor(inv + 1e-12)
    return bool(k * (fl + 1) <= n < k / gamma + alpha)


def witness_holder_constant(field_, gamma, seed=0):
    """Holder constant used for rescaling.

    All pairs when the grid has at most 4096 points; otherwise ``2**16``
    seeded pairs inflated by 10 percent.
    """
    if field_.k == 1 or field_.m**field_.k <= 4096:
        return holder_seminorm(field_, gamma, AllPairs())
    return 1.1 * holder_seminorm(field_, gamma, Sampled(1 << 16, seed))


def feasible_init(problem, seed=0, path_index=0):
    """A field strictly inside the problem's Holder ball.

    Samples a fractional Brownian field with Hurst index
    ``H = (gamma + min(k/(n-alpha), 1)) / 2``, measures its discrete
    ``gamma``-Holder constant ``K`` and returns ``rho / (K + 1)`` times it.
    With an endpoint ``p`` the sample is first turned into a bridge, scaled
    by ``(rho - |p|) / (K + 1)`` and shifted by ``t p``, so ``X(1) = p``
    exactly.

    Raises
    ------
    InfeasibleProblemError
        If ``gamma >= min(k/(n-alpha), 1)`` or ``|p| >= rho``.
    """
    k, n = problem.k, problem.n
    upper = min(k / (n - problem.alpha), 1.0)
    if not problem.gamma < upper:
        raise InfeasibleProblemError(
            f"need gamma < min(k/(n-alpha), 1) = {upper:.6g} for a finite-energy witness"
        )
    H = 0.5 * (problem.gamma + upper)
    base = sample_fbf(FieldSpec(H, k, n, problem.m, seed), path_index)
    if problem.endpoint is None:
        K = witness_holder_constant(base, problem.gamma, seed)
        out = base.scaled(problem.rho / (K + 1.0))
    else:
        p = problem.endpoint
        norm_p = float(np.linalg.norm(p))
        if norm_p >= problem.rho:
            raise InfeasibleProblemError(
                f"|p| = {norm_p:.6g} >= rho = {problem.rho:.6g}: the straight line alone uses the whole ball"
            )
        bridge = make_bridge(base, H)
        K = witness_holder_constant(bridge, problem.gamma, seed)
        t = np.linspace(0.0, 1.0, problem.m)[:, None]
        vals = (problem.rho - norm_p) / (K + 1.0) * bridge.values + t * p[None, :]
        vals[-1] = p
        out = bridge.with_values(vals)
    out.meta.update({"witness": "fbf", "H": H, "seed": seed, "raw_holder": K})
    return out
