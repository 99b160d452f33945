"""Fractional Brownian fields and bridges on uniform grids.

One-parameter fields (``k = 1``) are sampled exactly by circulant embedding
of fractional Gaussian noise; multi-parameter fields use a dense square root
of the grid covariance. Every path draws from its own Philox stream keyed by
``(seed, path_index)``.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import linalg

from ._validation import check_open_unit, check_positive_int, rng_for
from .measures import SampledField, grid_params

__all__ = [
    "FieldSpec",
    "CovKind",
    "CovModel",
    "sample_fbm_1d",
    "sample_fbf",
    "sample_paths",
    "make_bridge",
    "bridge_increment_variance",
    "lnd_form_variance",
    "fbm_covariance",
]

MAX_DENSE_POINTS = 4096


@dataclass(frozen=True)
class FieldSpec:
    """Hurst index, parameter/target dimensions, grid size and seed."""

    H: float
    k: int = 1
    n: int = 1
    m: int = 1025
    seed: int = 0

    def __post_init__(self):
        check_open_unit(self.H, "H")
        check_positive_int(self.k, "k")
        check_positive_int(self.n, "n")
        check_positive_int(self.m, "m", minimum=2)


def fbm_covariance(s, t, H):
    """``E b(s) b(t) = (|s|^2H + |t|^2H - |t-s|^2H) / 2``; scalars or points of ``R^k``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.ndim == 0 and t.ndim == 0:
        ns, nt, d = abs(s), abs(t), abs(t - s)
    else:
        ns = np.linalg.norm(s, axis=-1)
        nt = np.linalg.norm(t, axis=-1)
        d = np.linalg.norm(t - s, axis=-1)
    return 0.5 * (ns ** (2 * H) + nt ** (2 * H) - d ** (2 * H))


# ---------------------------------------------------------------- sampling


def _fgn_autocov(N, H):
    j = np.arange(N + 1, dtype=float)
    return 0.5 * (np.abs(j + 1) ** (2 * H) - 2 * j ** (2 * H) + np.abs(j - 1) ** (2 * H))


@lru_cache(maxsize=64)
def _circulant_sqrt_eigs(N, H):
    """Square roots of the circulant eigenvalues, or ``None`` if not PSD."""
    r = _fgn_autocov(N, H)
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    return np.sqrt(np.maximum(lam, 0.0) / row.shape[0])


@lru_cache(maxsize=64)
def _fgn_cholesky(N, H):
    r = _fgn_autocov(N, H)
    cov = linalg.toeplitz(r[:N])
    return linalg.cholesky(cov, lower=True)


def _fgn(N, H, rng):
    """Unit-spacing fractional Gaussian noise of length ``N`` and the backend used."""
    root = _circulant_sqrt_eigs(N, H)
    if root is not None:
        z = rng.standard_normal(root.shape[0]) + 1j * rng.standard_normal(root.shape[0])
        return np.fft.fft(root * z).real[:N], "circulant"
    return _fgn_cholesky(N, H) @ rng.standard_normal(N), "cholesky"


def _fbm_components(H, n, m, rng):
    N = m - 1
    out = np.zeros((m, n))
    backend = "circulant"
    scale = (1.0 / N) ** H
    for c in range(n):
        noise, backend = _fgn(N, H, rng)
        out[1:, c] = np.cumsum(noise) * scale
    return out, backend


@lru_cache(maxsize=16)
def _dense_factor(H, k, m):
    """Square root of the covariance on the grid minus the origin."""
    t = grid_params(k, m)[1:]
    if t.shape[0] + 1 > MAX_DENSE_POINTS:
        raise ValueError(
            f"dense sampling supports at most {MAX_DENSE_POINTS} grid points, got {m**k}"
        )
    nt = np.linalg.norm(t, axis=1) ** (2 * H)
    diff = t[:, None, :] - t[None, :, :]
    cov = 0.5 * (nt[:, None] + nt[None, :] - np.linalg.norm(diff, axis=-1) ** (2 * H))
    try:
        return linalg.cholesky(cov, lower=True), "cholesky"
    except linalg.LinAlgError:
        w, v = linalg.eigh(cov)
        if w.min() < -1e-8 * w.max():
            raise np.linalg.LinAlgError(
                f"grid covariance is indefinite: min eigenvalue {w.min():.3e}, "
                f"max {w.max():.3e}, condition estimate {w.max() / max(abs(w.min()), 1e-300):.3e}"
            )
        return v * np.sqrt(np.maximum(w, 0.0)), "eigh"


def _sample_values(spec, path_index):
    rng = rng_for(spec.seed, path_index)
    if spec.k == 1:
        return _fbm_components(spec.H, spec.n, spec.m, rng)
    factor, backend = _dense_factor(spec.H, spec.k, spec.m)
    z = rng.standard_normal((factor.shape[1], spec.n))
    flat = np.vstack([np.zeros((1, spec.n)), factor @ z])
    return flat.reshape((spec.m,) * spec.k + (spec.n,)), backend


def _meta(spec, path_index, backend):
    return {"H": spec.H, "seed": spec.seed, "path_index": path_index, "backend": backend}


def sample_fbm_1d(spec, path_index=0):
    """One fractional Brownian motion path on ``t = i/(m-1)``.

    The grid restriction has the exact Gaussian law. Circulant embedding of
    the ``m - 1`` noise increments is used; if the embedding is not
    nonnegative definite the Cholesky factor of the Toeplitz covariance is
    used instead. ``meta["backend"]`` records which path was taken.
    """
    if spec.k != 1 or spec.n != 1:
        raise ValueError("sample_fbm_1d needs k = 1 and n = 1")
    values, backend = _sample_values(spec, path_index)
    return SampledField(values, _meta(spec, path_index, backend))


def sample_fbf(spec, path_index=0):
    """One fractional Brownian ``(k, n)``-field sample, zero at the origin.

    The ``n`` components are independent copies of the scalar field with
    covariance ``(|s|^2H + |t|^2H - |t-s|^2H) / 2``. For ``k >= 2`` a dense
    factor of the ``m**k - 1`` dimensional covariance is computed once per
    ``(H, k, m)`` and reused.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the grid covariance is numerically indefinite.
    """
    values, backend = _sample_values(spec, path_index)
    return SampledField(values, _meta(spec, path_index, backend))


def sample_paths(spec, count, start=0):
    """Values of ``count`` independent samples stacked on a leading axis.

    Sample ``i`` equals ``sample_fbf(spec, start + i).values``.
    """
    check_positive_int(count, "count")
    return np.stack([_sample_values(spec, start + i)[0] for i in range(count)])


# ----------------------------------------------------------------- bridges


def _bridge_weight(t, H):
    return 0.5 * (t ** (2 * H) + 1.0 - (1.0 - t) ** (2 * H))


def make_bridge(path, H):
    """Fractional Brownian bridge ``b(t) - (t^2H + 1 - (1-t)^2H) b(1) / 2``.

    The weight is exactly 0 at ``t = 0`` and exactly 1 at ``t = 1``, so a
    path pinned at the origin yields a bridge that vanishes exactly at both
    endpoints.
    """
    check_open_unit(H, "H")
    if path.k != 1:
        raise ValueError("bridges are defined for one-parameter paths only")
    if path.m < 2:
        raise ValueError("path must include both endpoints t=0 and t=1")
    t = np.linspace(0.0, 1.0, path.m)
    vals = path.values - _bridge_weight(t, H)[:, None] * path.values[-1][None, :]
    meta = dict(path.meta)
    meta["bridge"] = True
    meta.setdefault("H", H)
    return SampledField(vals, meta)


def _bridge_increment_variance(s, t, H):
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    H2 = 2 * H
    shift = 0.5 * (hi**H2 - lo**H2) + 0.5 * ((1 - lo) ** H2 - (1 - hi) ** H2)
    return np.maximum((hi - lo) ** H2 - shift**2, 0.0)


def bridge_increment_variance(s, t, H):
    """Variance of ``b(t) - b(s)`` for the bridge, ``0 <= s < t <= 1``."""
    if not (0.0 <= s < t <= 1.0):
        raise ValueError(f"need 0 <= s < t <= 1, got s={s}, t={t}")
    return float(_bridge_increment_variance(s, t, H))


# ------------------------------------------------------- covariance models


class CovKind(str, Enum):
    FBF = "fbf"
    BRIDGE = "bridge"


@dataclass(frozen=True)
class CovModel:
    """Scalar covariance of one component of a fractional field or bridge.

    The ``n`` components are independent, so the increment covariance matrix
    is ``increment_variance(s, t) * I_n`` and its determinant is the ``n``-th
    power of the scalar variance.
    """

    kind: CovKind
    H: float
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", CovKind(self.kind))
        check_open_unit(self.H, "H")
        if self.kind is CovKind.BRIDGE and self.k != 1:
            raise ValueError("bridge covariance needs k = 1")

    def _params(self, t):
        # k = 1 parameters are plain scalars; add a coordinate axis
        t = np.asarray(t, dtype=float)
        return t[..., None] if self.k == 1 else t

    def cov(self, s, t):
        """``E X(s) X(t)`` for one scalar component.

        For ``k = 1`` the arguments are scalar parameters (any broadcastable
        shape); for ``k >= 2`` the last axis holds the ``k`` coordinates.
        """
        s = self._params(s)
        t = self._params(t)
        H2 = 2 * self.H
        ns = np.linalg.norm(s, axis=-1) ** H2
        nt = np.linalg.norm(t, axis=-1) ** H2
        c = 0.5 * (ns + nt - np.linalg.norm(t - s, axis=-1) ** H2)
        if self.kind is CovKind.BRIDGE:
            c = c - _bridge_weight(s[..., 0], self.H) * _bridge_weight(t[..., 0], self.H)
        return c

    def increment_variance(self, s, t):
        """``Var(X(t) - X(s))`` for one scalar component."""
        if self.kind is CovKind.FBF:
            d = np.linalg.norm(self._params(t) - self._params(s), axis=-1)
            return d ** (2 * self.H)
        return _bridge_increment_variance(np.asarray(s, float), np.asarray(t, float), self.H)

    def det(self, s, t, n):
        """Determinant of the ``n x n`` increment covariance matrix."""
        return self.increment_variance(s, t) ** n


def lnd_form_variance(cov, t_points, u_vectors):
    """Variance of ``sum_j <u_j, sigma_j^{-1} (X(t_j) - X(t_{j-1}))>``, ``t_0 = 0``.

    ``sigma_j`` is the square root of the increment covariance matrix, which
    is a multiple of the identity because the components are independent.
    The variance is the quadratic form
    ``sum_{j,l} <u_j, u_l> Cov(D_j, D_l) / (sigma_j sigma_l)``.

    Parameters
    ----------
    cov : CovModel
    t_points : array_like
        ``L`` parameters (shape ``(L,)`` for ``k = 1`` or ``(L, k)``),
        strictly increasing for ``k = 1``; the origin is prepended.
    u_vectors : array_like, shape (L, n)

    Raises
    ------
    ValueError
        If an increment has zero variance; the message names the index.
    """
    t = np.asarray(t_points, dtype=float)
    t = t.reshape(-1, 1) if cov.k == 1 else t.reshape(-1, cov.k)
    if cov.k == 1 and np.any(np.diff(np.r_[0.0, t[:, 0]]) <= 0):
        raise ValueError("t_points must be strictly increasing and positive")
    u = np.asarray(u_vectors, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape[0] != t.shape[0]:
        raise ValueError(f"{t.shape[0]} parameters but {u.shape[0]} vectors")
    full = np.vstack([np.zeros((1, t.shape[1])), t])
    if cov.k == 1:
        full = full[:, 0]
        C = cov.cov(full[:, None], full[None, :])
    else:
        C = cov.cov(full[:, None, :], full[None, :, :])
    # Cov(D_j, D_l) with D_j = X(t_j) - X(t_{j-1})
    D = C[1:, 1:] - C[1:, :-1] - C[:-1, 1:] + C[:-1, :-1]
    var = np.diag(D).copy()
    bad = np.nonzero(var <= 0.0)[0]
    if bad.size:
        j = int(bad[0]) + 1
        raise ValueError(f"increment {j} (t_{j - 1} -> t_{j}) has singular covariance")
    sig = np.sqrt(var)
    G = u @ u.T
    return float(np.sum(G * D / np.outer(sig, sig)))
