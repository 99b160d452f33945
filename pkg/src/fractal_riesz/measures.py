"""Discrete measures, sampled fields and their Riesz potentials and energies.

A :class:`SampledField` holds the values of a map ``X: [0, 1]^k -> R^n`` on
the uniform grid ``t = index / (m - 1)``. Its occupation measure puts mass
``m**-k`` at every sampled value. Potentials and energies of such weighted
point clouds are plain double sums with the Riesz kernel ``|x|**(alpha-n)``.
"""

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_point, check_points, check_positive_int, check_riesz_order
from .kernels import bessel_kernel_radial

__all__ = [
    "DiscreteMeasure",
    "SampledField",
    "Diagonal",
    "occupation_measure",
    "riesz_potential",
    "bessel_potential",
    "mutual_energy",
    "self_energy",
    "fourier_transform",
    "sup_potential",
    "maximal_function",
    "diagnostic_frequencies",
]

# rows of the left factor processed per block in double sums
_BLOCK = 512


@dataclass
class DiscreteMeasure:
    """Weighted point cloud ``sum_i w_i delta_{a_i}`` in ``R^n``.

    ``cell_scale`` optionally records, per atom, the typical distance to the
    images of neighbouring grid cells; it is only used by the
    ``Diagonal.CELL_MIDPOINT`` rule of :func:`self_energy`.
    """

    atoms: np.ndarray
    weights: np.ndarray
    cell_scale: np.ndarray = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.atoms.ndim == 1:
            self.atoms = self.atoms.reshape(-1, 1)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.atoms.shape[0] != self.weights.shape[0]:
            raise ValueError(
                f"{self.atoms.shape[0]} atoms but {self.weights.shape[0]} weights"
            )
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(self.atoms)):
            raise ValueError("atoms must be finite")
        if self.cell_scale is not None:
            self.cell_scale = np.asarray(self.cell_scale, dtype=float).ravel()

    @property
    def n(self):
        return self.atoms.shape[1]

    @property
    def mass(self):
        return float(np.sum(self.weights))

    def __len__(self):
        return self.atoms.shape[0]

    @classmethod
    def dirac(cls, point, weight=1.0):
        point = np.asarray(point, dtype=float).reshape(1, -1)
        return cls(point, [weight])

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0))

    def scaled(self, lam):
        """Push-forward under ``x -> lam * x``."""
        cs = None if self.cell_scale is None else abs(lam) * self.cell_scale
        return DiscreteMeasure(lam * self.atoms, self.weights.copy(), cs)

    def to_csv(self, path):
        """Write columns ``x_1..x_n, weight`` with a header row."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{i + 1}" for i in range(self.n)] + ["weight"])
            for a, w in zip(self.atoms, self.weights):
                writer.writerow([repr(float(v)) for v in a] + [repr(float(w))])

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "weight" or not all(
                h == f"x_{i + 1}" for i, h in enumerate(header[:-1])
            ):
                raise ValueError(f"bad measure CSV header: {header}")
            rows = [[float(v) for v in row] for row in reader if row]
        n = len(header) - 1
        if not rows:
            return cls.empty(n)
        data = np.asarray(rows, dtype=float)
        return cls(data[:, :n], data[:, n])


@dataclass
class SampledField:
    """Values of ``X: [0,1]^k -> R^n`` on a uniform grid with ``m`` points per axis.

    ``values`` has shape ``(m,) * k + (n,)``; grid index ``i`` corresponds to
    the parameter ``i / (m - 1)``.
    """

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim < 2:
            raise ValueError("values must have shape (m,)*k + (n,)")
        grid_shape = self.values.shape[:-1]
        if len(set(grid_shape)) != 1:
            raise ValueError(f"grid must be cubic, got shape {grid_shape}")
        if grid_shape[0] < 1:
            raise ValueError("field is empty")

    @property
    def k(self):
        return self.values.ndim - 1

    @property
    def n(self):
        return self.values.shape[-1]

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def origin_pinned(self):
        return bool(np.all(self.values[(0,) * self.k] == 0.0))

    def points(self):
        """Sampled values as an ``(m**k, n)`` array in C order."""
        return self.values.reshape(-1, self.n)

    def params(self):
        """Grid parameters as an ``(m**k, k)`` array in the same order as :meth:`points`."""
        return grid_params(self.k, self.m)

    def with_values(self, values, **meta):
        new_meta = dict(self.meta)
        new_meta.update(meta)
        return SampledField(np.asarray(values, dtype=float).reshape(self.values.shape), new_meta)

    def scaled(self, lam):
        return self.with_values(lam * self.values)

    @classmethod
    def from_function(cls, func, k, n, m, **meta):
        """Sample ``func`` (mapping an ``(N, k)`` array to ``(N, n)``) on the grid."""
        t = grid_params(k, m)
        vals = np.asarray(func(t), dtype=float).reshape((m,) * k + (n,))
        return cls(vals, dict(meta))

    @classmethod
    def from_points(cls, points, k=1):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        m = round(points.shape[0] ** (1.0 / k))
        if m**k != points.shape[0]:
            raise ValueError(f"{points.shape[0]} points do not form a {k}-dimensional cubic grid")
        return cls(points.reshape((m,) * k + (points.shape[1],)))

    def to_csv(self, path, metadata=True):
        """Write columns ``t_1..t_k, x_1..x_n``; optionally a JSON sidecar."""
        path = Path(path)
        t = self.params()
        x = self.points()
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"t_{i + 1}" for i in range(self.k)] + [f"x_{i + 1}" for i in range(self.n)]
            )
            for ti, xi in zip(t, x):
                writer.writerow([repr(float(v)) for v in ti] + [repr(float(v)) for v in xi])
        if metadata:
            meta = {"k": self.k, "n": self.n, "m": self.m}
            meta.update(self.meta)
            path.with_suffix(".json").write_text(
                json.dumps(meta, indent=2, sort_keys=True, default=_json_default),
                encoding="utf-8",
            )

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        k = sum(1 for h in header if h.startswith("t_"))
        n = sum(1 for h in header if h.startswith("x_"))
        if k + n != len(header) or k == 0 or n == 0:
            raise ValueError(f"bad field CSV header: {header}")
        data = np.asarray(rows, dtype=float)
        out = cls.from_points(data[:, k:], k=k)
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text(encoding="utf-8"))
            for key in ("k", "n", "m"):
                meta.pop(key, None)
            out.meta.update(meta)
        return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def grid_params(k, m):
    """Parameters ``index / (m - 1)`` of the full grid, shape ``(m**k, k)``."""
    axis = np.linspace(0.0, 1.0, m) if m > 1 else np.zeros(1)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _cell_scale(field_):
    """Mean distance from each sampled value to its axis neighbours' values."""
    vals = field_.values
    total = np.zeros(vals.shape[:-1])
    count = np.zeros(vals.shape[:-1])
    for ax in range(field_.k):
        if field_.m < 2:
            break
        d = np.linalg.norm(np.diff(vals, axis=ax), axis=-1)
        lo = [slice(None)] * field_.k
        hi = [slice(None)] * field_.k
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        total[tuple(lo)] += d
        count[tuple(lo)] += 1
        total[tuple(hi)] += d
        count[tuple(hi)] += 1
    with np.errstate(invalid="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), 0.0).ravel()


def occupation_measure(field_):
    """Occupation measure of a sampled field: mass ``m**-k`` at every sample."""
    pts = field_.points()
    if pts.shape[0] == 0:
        raise ValueError("field is empty")
    w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return DiscreteMeasure(pts.copy(), w, cell_scale=_cell_scale(field_))


def _kernel_matrix(x, atoms, alpha, n):
    d = np.sqrt(np.maximum(
        np.sum(x * x, axis=1)[:, None] + np.sum(atoms * atoms, axis=1)[None, :]
        - 2.0 * x @ atoms.T, 0.0))
    # exact distances where the Gram trick loses precision
    close = d < 1e-6 * (1.0 + np.abs(x).max(initial=0.0) + np.abs(atoms).max(initial=0.0))
    if np.any(close):
        ii, jj = np.nonzero(close)
        d[ii, jj] = np.linalg.norm(x[ii] - atoms[jj], axis=1)
    with np.errstate(divide="ignore"):
        return np.power(d, alpha - n), d


def _potential_values(atoms, weights, x, kernel):
    out = np.empty(x.shape[0])
    active = weights > 0
    atoms = atoms[active]
    weights = weights[active]
    for start in range(0, x.shape[0], _BLOCK):
        xb = x[start:start + _BLOCK]
        diff = xb[:, None, :] - atoms[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        kv = kernel(r)
        out[start:start + _BLOCK] = kv @ weights
    return out


def riesz_potential(mu, x, alpha):
    """Riesz potential ``U^alpha mu(x) = sum_i w_i |x - a_i|**(alpha - n)``.

    ``x`` may be a single point (float returned) or an ``(N, n)`` array. The
    value is ``+inf`` wherever ``x`` coincides with an atom of positive weight.
    """
    check_riesz_order(alpha, mu.n)
    single = np.ndim(x) <= 1 and not (mu.n == 1 and np.ndim(x) == 1 and np.size(x) > 1)
    pts = check_points(x, mu.n)
    vals = _potential_values(
        mu.atoms, mu.weights, pts,
        lambda r: np.where(r == 0.0, np.inf, np.power(np.where(r == 0.0, 1.0, r), alpha - mu.n)),
    )
    return float(vals[0]) if single else vals


def bessel_potential(mu, x, alpha):
    """Bessel potential ``G_alpha mu(x) = sum_i w_i g_alpha(x - a_i)``."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    single = np.ndim(x) <= 1 and not (mu.n == 1 and np.ndim(x) == 1 and np.size(x) > 1)
    pts = check_points(x, mu.n)
    n = mu.n
    vals = _potential_values(
        mu.atoms, mu.weights, pts,
        lambda r: bessel_kernel_radial(r.ravel(), alpha, n).reshape(r.shape),
    )
    return float(vals[0]) if single else vals


def _pair_sum(a_atoms, a_w, b_atoms, b_w, alpha, n, exclude_diagonal=False):
    """``sum_ij wa_i wb_j |a_i - b_j|**(alpha-n)`` with +inf on coincident positive pairs."""
    ka = a_w > 0
    kb = b_w > 0
    if exclude_diagonal:
        idx = np.nonzero(ka & kb)[0]
        a_atoms, a_w = a_atoms[idx], a_w[idx]
        b_atoms, b_w = a_atoms, a_w
    else:
        a_atoms, a_w = a_atoms[ka], a_w[ka]
        b_atoms, b_w = b_atoms[kb], b_w[kb]
    partial = []
    for start in range(0, a_atoms.shape[0], _BLOCK):
        xa = a_atoms[start:start + _BLOCK]
        diff = xa[:, None, :] - b_atoms[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        if exclude_diagonal:
            rows = np.arange(xa.shape[0])
            r[rows, start + rows] = np.nan
        if np.any(r == 0.0):
            return np.inf
        with np.errstate(divide="ignore"):
            kv = np.power(r, alpha - n)
        if exclude_diagonal:
            kv = np.nan_to_num(kv, nan=0.0)
        partial.append(a_w[start:start + _BLOCK] @ (kv @ b_w))
    return float(np.sum(partial)) if partial else 0.0


def mutual_energy(mu, nu, alpha):
    """Mutual Riesz energy ``sum_i sum_j w_i v_j |a_i - b_j|**(alpha - n)``.

    Coincident atoms contribute ``+inf`` unless one of the weights is zero.
    """
    if mu.n != nu.n:
        raise ValueError(f"dimension mismatch: {mu.n} vs {nu.n}")
    check_riesz_order(alpha, mu.n)
    # a canonical argument order makes the result bitwise symmetric
    key_mu = (len(mu), mu.atoms.tobytes(), mu.weights.tobytes())
    key_nu = (len(nu), nu.atoms.tobytes(), nu.weights.tobytes())
    if key_nu < key_mu:
        mu, nu = nu, mu
    return _pair_sum(mu.atoms, mu.weights, nu.atoms, nu.weights, alpha, mu.n)


class Diagonal(str, Enum):
    """Treatment of the ``i == j`` terms in a discrete self-energy."""

    EXCLUDE = "exclude"
    CELL_MIDPOINT = "cell_midpoint"


def self_energy(mu, alpha, diagonal=Diagonal.EXCLUDE):
    """Discrete self-interaction energy ``I^alpha(mu)``.

    With ``Diagonal.EXCLUDE`` only the off-diagonal pairs are summed, which
    underestimates the continuum energy of a finite-energy field by the
    missing near-diagonal contribution. ``Diagonal.CELL_MIDPOINT`` adds, for
    every atom, ``w_i**2 * k_alpha(cell_scale_i / 2)``; atoms without a
    recorded cell scale use half the nearest-neighbour distance instead.
    """
    diagonal = Diagonal(diagonal)
    check_riesz_order(alpha, mu.n)
    off = _pair_sum(mu.atoms, mu.weights, mu.atoms, mu.weights, alpha, mu.n, exclude_diagonal=True)
    if diagonal is Diagonal.EXCLUDE or not np.isfinite(off):
        return off
    scale = mu.cell_scale
    if scale is None or scale.shape[0] != len(mu):
        if len(mu) < 2:
            return off
        dist, _ = cKDTree(mu.atoms).query(mu.atoms, k=2)
        scale = dist[:, 1]
    with np.errstate(divide="ignore"):
        diag_k = np.power(scale / 2.0, alpha - mu.n)
    w2 = mu.weights**2
    active = w2 > 0
    if np.any(scale[active] == 0.0):
        return np.inf
    return off + float(np.sum(w2[active] * diag_k[active]))


def fourier_transform(mu, xi):
    """``mu_hat(xi) = sum_i w_i exp(i <a_i, xi>)`` at one or several frequencies."""
    single = np.ndim(xi) <= 1 and not (mu.n == 1 and np.ndim(xi) == 1 and np.size(xi) > 1)
    freqs = check_points(xi, mu.n, name="xi")
    phase = mu.atoms @ freqs.T
    vals = np.exp(1j * phase).T @ mu.weights
    return complex(vals[0]) if single else vals


def diagnostic_frequencies(n, count=32, radius=16 * np.pi, seed=0):
    """Fixed frequency set: seeded draws in a ball plus axis lattice points.

    Half of the set (rounded down) are axis-aligned points ``j * pi * e_i``;
    the rest are uniform draws from the ball of the given radius.
    """
    check_positive_int(count, "count")
    axis = []
    j = 1
    while len(axis) < count // 2:
        for i in range(n):
            if len(axis) < count // 2:
                v = np.zeros(n)
                v[i] = j * np.pi
                axis.append(v)
        j += 1
    rng = np.random.default_rng(seed)
    n_rand = count - len(axis)
    g = rng.standard_normal((n_rand, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = radius * rng.random(n_rand) ** (1.0 / n)
    rand = g * rad[:, None]
    return np.vstack([np.asarray(axis).reshape(-1, n), rand])


def sup_potential(mu, eval_points, alpha):
    """Maximum of the Riesz potential over an explicit, nonempty point set."""
    pts = np.asarray(eval_points, dtype=float)
    if pts.size == 0:
        raise ValueError("evaluation set is empty")
    vals = riesz_potential(mu, check_points(pts, mu.n), alpha)
    return float(np.max(vals))


def maximal_function(nu, x, gamma, R):
    """Truncated fractional maximal function ``sup_{0<r<R} r**(gamma-n) nu(B(x, r))``.

    Open balls are used. For a discrete measure ``nu(B(x, r))`` only changes
    at atom distances, and for ``gamma < n`` the supremum over each interval
    is approached as ``r`` decreases to its left end, so the value is exact.
    """
    n = nu.n
    if R <= 0:
        raise ValueError("R must be positive")
    if not (0.0 <= gamma <= n):
        raise ValueError(f"gamma must lie in [0, n], got {gamma}")
    x = check_point(x, n)
    active = nu.weights > 0
    d = np.linalg.norm(nu.atoms[active] - x, axis=1)
    w = nu.weights[active]
    inside = d < R
    if not np.any(inside):
        return 0.0
    d, w = d[inside], w[inside]
    if gamma == n:
        return float(np.sum(w))
    if np.any(d == 0.0):
        return np.inf
    order = np.argsort(d, kind="stable")
    d, w = d[order], w[order]
    cum = np.cumsum(w)
    # last index of each distinct distance
    last = np.r_[d[1:] != d[:-1], True]
    return float(np.max(np.power(d[last], gamma - n) * cum[last]))
