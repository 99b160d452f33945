"""Composition of cell-constant BV functions with sampled fields.

A :class:`BVGridFunction` is constant on the cells of a uniform lattice over
a box and zero outside it, so its gradient is carried by the faces between
cells with different values. Its total variation measure is represented by
one atom per jump face. The module evaluates fractional Sobolev seminorms,
the potential functional ``V`` of a field against that measure, the
composition itself, and the ratio of the two sides of the multiplicative
estimate for the composed field.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_exponent, check_open_unit, check_points, inv, rng_for
from .analysis import AllPairs, holder_seminorm
from .measures import DiscreteMeasure, SampledField, maximal_function, riesz_potential

__all__ = [
    "BVGridFunction",
    "CompositionParams",
    "CompositionError",
    "ParameterGateError",
    "gradient_measure",
    "gagliardo_seminorm",
    "v_functional",
    "compose",
    "verify_main_estimate",
    "pointwise_bv_check",
    "product_functional",
    "minimize_product",
]


class CompositionError(ValueError):
    """The field spends positive time on the jump set, so the composition is undefined."""


class ParameterGateError(ValueError):
    """Exponents outside the admissible range of the composition estimate."""


# ------------------------------------------------------------ BV functions


@dataclass
class BVGridFunction:
    """Cell-constant function on a box in ``R^n`` (``n`` in {1, 2}), zero outside.

    ``values`` has one entry per cell (shape ``(N,)`` or ``(N1, N2)``);
    ``lower`` and ``upper`` are the box corners.
    """

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (1, 2):
            raise ValueError("only n = 1 and n = 2 are supported")
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.shape[0] != self.n or self.upper.shape[0] != self.n:
            raise ValueError("box corners must have one entry per dimension")
        if np.any(self.upper <= self.lower):
            raise ValueError("box must have positive side lengths")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cell values must be finite")

    @property
    def n(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def cell(self):
        return (self.upper - self.lower) / np.asarray(self.shape)

    @classmethod
    def from_function(cls, func, lower, upper, shape):
        """Sample ``func`` (mapping ``(N, n)`` points to values) at cell centres."""
        lower = np.asarray(lower, float).reshape(-1)
        upper = np.asarray(upper, float).reshape(-1)
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        axes = [lower[i] + (np.arange(shape[i]) + 0.5) * (upper[i] - lower[i]) / shape[i]
                for i in range(len(shape))]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        vals = np.asarray(func(pts), dtype=float).reshape(shape)
        return cls(vals, lower, upper)

    @classmethod
    def disc_indicator(cls, center, radius, lower, upper, shape):
        c = np.asarray(center, float)
        return cls.from_function(
            lambda p: (np.linalg.norm(p - c, axis=1) < radius).astype(float), lower, upper, shape
        )

    @classmethod
    def square_indicator(cls, corner_lo, corner_hi, lower, upper, shape):
        lo = np.asarray(corner_lo, float)
        hi = np.asarray(corner_hi, float)
        return cls.from_function(
            lambda p: np.all((p > lo) & (p < hi), axis=1).astype(float), lower, upper, shape
        )

    def cell_index(self, points):
        """Integer cell indices (may fall outside ``[0, N)`` for points off the box)."""
        pts = check_points(points, self.n)
        return np.floor((pts - self.lower) / self.cell).astype(np.int64)

    def __call__(self, points):
        """Cell value at each point; ``0`` outside the box.

        Points on a face take the value of the cell on the upper side.
        """
        idx = self.cell_index(points)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.shape)), axis=1)
        out = np.zeros(idx.shape[0])
        if np.any(inside):
            out[inside] = self.values[tuple(idx[inside].T)]
        return out

    def jump_faces(self):
        """Faces with nonzero jump, including the box boundary.

        Returns
        -------
        centers : ndarray, shape (F, n)
        axis : ndarray of int, shape (F,)
            Coordinate axis normal to the face.
        jump : ndarray, shape (F,)
            Value on the upper side minus value on the lower side.
        area : ndarray, shape (F,)
            ``(n-1)``-dimensional face measure (1 for ``n = 1``).
        """
        padded = np.pad(self.values, 1)
        h = self.cell
        centers, axes, jumps, areas = [], [], [], []
        for ax in range(self.n):
            d = np.diff(padded, axis=ax)
            # drop the padding rows of the other axes
            sl = [slice(1, -1)] * self.n
            sl[ax] = slice(None)
            d = d[tuple(sl)]
            nz = np.nonzero(d)
            if nz[0].size == 0:
                continue
            coords = np.empty((nz[0].size, self.n))
            for i in range(self.n):
                if i == ax:
                    coords[:, i] = self.lower[i] + nz[i] * h[i]
                else:
                    coords[:, i] = self.lower[i] + (nz[i] + 0.5) * h[i]
            centers.append(coords)
            axes.append(np.full(nz[0].size, ax))
            jumps.append(d[nz])
            areas.append(np.full(nz[0].size, np.prod(np.delete(h, ax)) if self.n > 1 else 1.0))
        if not centers:
            return np.zeros((0, self.n)), np.zeros(0, int), np.zeros(0), np.zeros(0)
        return np.vstack(centers), np.concatenate(axes), np.concatenate(jumps), np.concatenate(areas)

    def total_variation(self):
        _, _, jump, area = self.jump_faces()
        return float(np.sum(np.abs(jump) * area))

    def to_dict(self):
        return {"values": self.values.tolist(), "lower": self.lower.tolist(),
                "upper": self.upper.tolist()}

    def to_csv(self, path):
        """Cell values as CSV (rows along the first axis) plus a JSON box sidecar."""
        import json
        from pathlib import Path

        path = Path(path)
        np.savetxt(path, np.atleast_2d(self.values) if self.n == 2 else self.values[None, :],
                   delimiter=",", fmt="%.17g")
        path.with_suffix(".json").write_text(json.dumps(
            {"n": self.n, "shape": list(self.shape), "lower": self.lower.tolist(),
             "upper": self.upper.tolist()}, indent=2), encoding="utf-8")

    @classmethod
    def from_csv(cls, path):
        import json
        from pathlib import Path

        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        vals = np.loadtxt(path, delimiter=",", ndmin=2).reshape(meta["shape"])
        return cls(vals, meta["lower"], meta["upper"])


def gradient_measure(phi):
    """Total variation measure: one atom per jump face, weight ``|jump| * area``."""
    centers, _, jump, area = phi.jump_faces()
    return DiscreteMeasure(centers, np.abs(jump) * area)


# ------------------------------------------------------------ seminorms


def gagliardo_seminorm(u, delta, ell):
    """Discrete ``[u]_{delta, ell}`` over the parameter cube.

    ``(sum_{i != j} w**2 |u_i - u_j|**ell / |t_i - t_j|**(k + delta ell))**(1/ell)``
    with ``w = m**-k``. For ``ell = inf`` the Holder seminorm of order
    ``delta`` is returned.
    """
    check_open_unit(delta, "delta")
    ell = check_exponent(ell, "ell")
    if np.isinf(ell):
        return holder_seminorm(u, delta, AllPairs())
    x = u.points()
    t = u.params()
    k = u.k
    w = 1.0 / x.shape[0]
    power = k + delta * ell
    if k == 1:
        h = 1.0 / (u.m - 1)
        total = 0.0
        for lag in range(1, u.m):
            d = np.linalg.norm(x[lag:] - x[:-lag], axis=1)
            total += 2.0 * float(np.sum(d**ell)) / (lag * h) ** power
    else:
        total = 0.0
        for start in range(0, x.shape[0], 256):
            dx = np.linalg.norm(x[start:start + 256, None, :] - x[None, :, :], axis=-1)
            dt = np.linalg.norm(t[start:start + 256, None, :] - t[None, :, :], axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(dt > 0, dx**ell / dt**power, 0.0)
            total += float(terms.sum())
    return (w * w * total) ** (1.0 / ell)


def _potential_values(phi, u, s):
    if u.n != phi.n:
        raise ValueError(f"field takes values in R^{u.n}, BV function lives on R^{phi.n}")
    check_open_unit(s, "s")
    G = gradient_measure(phi)
    if len(G) == 0:
        return np.zeros(u.points().shape[0])
    return riesz_potential(G, u.points(), 1.0 - s)


def v_functional(phi, u, s, p):
    """``V_{phi,s,p}(u) = (1/m^k) sum_x (U^{1-s} ||D phi|| (u(x)))**p``; max over the grid for ``p = inf``.

    Returns ``+inf`` when a sample hits an atom of the gradient measure.
    """
    p = check_exponent(p, "p")
    U = _potential_values(phi, u, s)
    if np.isinf(p):
        return float(np.max(U))
    if not np.all(np.isfinite(U)):
        return math.inf
    return float(np.mean(U**p))


# ------------------------------------------------------------ composition


def _face_hits(phi, x):
    """Samples lying exactly on a face that carries a nonzero jump."""
    h = phi.cell
    rel = (x - phi.lower) / h
    idx = np.floor(rel).astype(np.int64)
    hits = np.zeros(x.shape[0], bool)
    padded = np.pad(phi.values, 1)
    shape = np.asarray(phi.shape)
    for ax in range(phi.n):
        on = rel[:, ax] == idx[:, ax]
        if not np.any(on):
            continue
        rows = np.nonzero(on)[0]
        hi_idx = idx[rows] + 1  # padded index of the cell above the face
        lo_idx = hi_idx.copy()
        lo_idx[:, ax] -= 1
        hi_c = np.clip(hi_idx, 0, shape + 1)
        lo_c = np.clip(lo_idx, 0, shape + 1)
        jump = padded[tuple(hi_c.T)] != padded[tuple(lo_c.T)]
        hits[rows[jump]] = True
    return hits


def compose(phi, u, tol=1e-6):
    """``phi o u`` sampled on the grid of ``u``.

    Samples that land exactly on a jump face are counted; if their share of
    grid points exceeds ``tol`` the composition is refused, because then the
    field charges the jump set and no representative of ``phi`` gives a
    well-defined composition. Below the tolerance those samples take the
    value of the cell on the upper side.

    Raises
    ------
    CompositionError
    """
    x = u.points()
    if x.shape[1] != phi.n:
        raise ValueError(f"field takes values in R^{x.shape[1]}, BV function lives on R^{phi.n}")
    hits = _face_hits(phi, x)
    share = hits.mean()
    if share > tol:
        raise CompositionError(
            f"field spends a fraction {share:.3g} of its parameter domain on the jump set "
            f"(tolerance {tol:g}); the composition needs the occupation measure to vanish there"
        )
    vals = phi(x).reshape(u.values.shape[:-1] + (1,))
    meta = dict(u.meta)
    meta.update({"composed": True, "face_hits": int(hits.sum())})
    return SampledField(vals, meta)


@dataclass(frozen=True)
class CompositionParams:
    """Exponents of the composition estimate.

    The gate is ``1/p + s/q <= 1/r`` (with ``1/inf = 0``); ``beta`` must lie
    in ``(0, theta s)``, where ``beta = theta s`` is allowed for ``r = inf``
    or for ``q = s r``.
    """

    s: float
    theta: float
    p: float
    q: float
    r: float
    beta: float

    def __post_init__(self):
        check_open_unit(self.s, "s")
        check_open_unit(self.theta, "theta")
        for name in ("p", "q", "r"):
            object.__setattr__(self, name, check_exponent(getattr(self, name), name))
        lhs = inv(self.p) + self.s * inv(self.q)
        if lhs > inv(self.r) * (1 + 1e-12) + 1e-15:
            raise ParameterGateError(
                f"exponent gate 1/p + s/q <= 1/r violated: {lhs:.6g} > {inv(self.r):.6g}"
            )
        ts = self.theta * self.s
        if not self.beta > 0:
            raise ParameterGateError("beta must be positive")
        if self.beta > ts:
            raise ParameterGateError(f"beta = {self.beta} exceeds theta s = {ts:.6g}")
        if self.beta == ts and not (np.isinf(self.r) or math.isclose(self.q, self.s * self.r)):
            raise ParameterGateError(
                "beta = theta s is admissible only for r = inf or q = s r"
            )


def verify_main_estimate(phi, u, params):
    """Both sides of ``[phi o u]_{beta,r} <= c [u]_{theta,q}^s V_{phi,s,p}(u)^{1/p}``.

    Returns a dict with ``lhs``, ``rhs_factor_seminorm`` (``[u]^s``),
    ``rhs_factor_V`` (``V^{1/p}``, or ``V`` for ``p = inf``) and ``ratio``,
    the empirical constant for this instance.
    """
    if not isinstance(params, CompositionParams):
        params = CompositionParams(**params)
    composed = compose(phi, u)
    lhs = gagliardo_seminorm(composed, params.beta, params.r)
    semi = gagliardo_seminorm(u, params.theta, params.q) ** params.s
    V = v_functional(phi, u, params.s, params.p)
    vfac = V if np.isinf(params.p) else V ** (1.0 / params.p)
    denom = semi * vfac
    if denom == 0.0:
        ratio = 0.0 if lhs == 0.0 else math.inf
    else:
        ratio = lhs / denom
    return {"lhs": lhs, "rhs_factor_seminorm": semi, "rhs_factor_V": vfac, "ratio": ratio}


def pointwise_bv_check(phi, xi, eta, s):
    """Ratios ``|phi(xi) - phi(eta)| / (|xi - eta|**s (M(xi) + M(eta)))``.

    ``M`` is the truncated fractional maximal function of order ``1 - s`` and
    radius ``4 |xi - eta|`` of the gradient measure. Pairs with an endpoint on
    a jump face, or with ``xi == eta``, are skipped and counted.
    """
    check_open_unit(s, "s")
    xi = check_points(xi, phi.n)
    eta = check_points(eta, phi.n)
    if xi.shape != eta.shape:
        raise ValueError("xi and eta must have the same shape")
    G = gradient_measure(phi)
    on_jump = _face_hits(phi, xi) | _face_hits(phi, eta)
    dist = np.linalg.norm(xi - eta, axis=1)
    skip = on_jump | (dist == 0)
    fx, fy = phi(xi), phi(eta)
    ratios = []
    for a, b, d, num in zip(xi[~skip], eta[~skip], dist[~skip], np.abs(fx - fy)[~skip]):
        if num == 0.0:
            ratios.append(0.0)
            continue
        R = 4.0 * d
        Ma = maximal_function(G, a, 1.0 - s, R)
        Mb = maximal_function(G, b, 1.0 - s, R)
        den = d**s * (Ma + Mb)
        ratios.append(math.inf if den == 0 else num / den)
    ratios = np.asarray(ratios)
    if ratios.size == 0:
        return {"max_ratio": float("nan"), "quantiles": {}, "skipped": int(skip.sum()), "count": 0}
    qs = (0.5, 0.9, 0.99)
    return {
        "max_ratio": float(ratios.max()),
        "quantiles": {str(q): float(np.quantile(ratios, q)) for q in qs},
        "skipped": int(skip.sum()),
        "count": int(ratios.size),
    }


# ------------------------------------------------------ product functional


def product_functional(phi, u, s, p, theta):
    """``[u]_{theta,inf}**s * V_{phi,s,p}(u)``."""
    check_open_unit(theta, "theta")
    semi = holder_seminorm(u, theta, AllPairs())
    if semi == 0.0:
        return 0.0
    return semi**s * v_functional(phi, u, s, p)


def minimize_product(phi, init, s, p, theta, rho, M, iters=200, step=None, seed=0):
    """Random-search descent of the product functional over ``K'``.

    ``K' = {u : u(0) = 0, [u]_{theta,inf} < rho, V_{phi,s,1}(u) < M}``.
    Proposals add seeded Gaussian noise to the free grid values, are pulled
    into the Holder ball of radius ``rho (1 - 1e-6)`` and accepted when they
    stay in ``K'`` and lower the product. The initial field must lie in
    ``K'``.

    Returns
    -------
    field : SampledField
    value : float
    trace : list of (iteration, value)
    """
    from .minimize import ProjectionError, project_holder

    def admissible(v):
        return (
            np.all(v.points()[0] == 0)
            and holder_seminorm(v, theta, AllPairs()) < rho
            and v_functional(phi, v, s, 1.0) < M
        )

    if not admissible(init):
        raise ValueError("initial field is not in the admissible class")
    rng = rng_for(seed, 0)
    best = init
    best_val = product_functional(phi, init, s, p, theta)
    step = step if step is not None else 0.1 * rho * init.m ** (-theta)
    trace = [(0, best_val)]
    for it in range(1, iters + 1):
        noise = rng.standard_normal(best.values.shape) * step
        cand = best.values + noise
        cand.reshape(-1, best.n)[0] = 0.0
        try:
            prop = project_holder(best.with_values(cand), theta, rho * (1 - 1e-6))
        except ProjectionError:
            continue
        if not admissible(prop):
            continue
        val = product_functional(phi, prop, s, p, theta)
        if val < best_val:
            best, best_val = prop, val
            trace.append((it, best_val))
    return best, best_val, trace
