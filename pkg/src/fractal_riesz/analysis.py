"""Regularity and geometry diagnostics for sampled fields.

Discrete Holder seminorms, box-counting dimension of point clouds and
polylines, oscillation statistics at scale ``h`` and the check that a bounded
occupation potential forces a nondegenerate lower oscillation.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points, check_positive_int, check_riesz_order
from .measures import SampledField, grid_params

__all__ = [
    "AllPairs",
    "Sampled",
    "holder_seminorm",
    "holder_seminorm_pairs",
    "BoxDimensionResult",
    "box_dimension",
    "densify_polyline",
    "default_scales",
    "OscillationReport",
    "oscillation_moduli",
    "BdpotReport",
    "bdpot_diagnostic",
    "discrete_occupation_potential",
]


@dataclass(frozen=True)
class AllPairs:
    """Use every pair of grid points."""


@dataclass(frozen=True)
class Sampled:
    """Use ``count`` uniformly drawn pairs of distinct grid points."""

    count: int = 1 << 16
    seed: int = 0


_PAIR_BLOCK = 256


def _as_field(field_):
    if isinstance(field_, SampledField):
        return field_
    return SampledField.from_points(np.asarray(field_, dtype=float), k=1)


def _holder_all_pairs_1d(x, gamma):
    m = x.shape[0]
    h = 1.0 / (m - 1)
    best = 0.0
    for lag in range(1, m):
        d = x[lag:] - x[:-lag]
        r = np.sqrt(np.max(np.einsum("ij,ij->i", d, d)))
        best = max(best, r / (lag * h) ** gamma)
    return best


def holder_seminorm_pairs(points, params, gamma, i, j):
    """Largest ``|X_i - X_j| / |t_i - t_j|**gamma`` over explicit index pairs."""
    if len(i) == 0:
        return 0.0
    dx = np.linalg.norm(points[i] - points[j], axis=1)
    dt = np.linalg.norm(params[i] - params[j], axis=1)
    keep = dt > 0
    if not np.any(keep):
        return 0.0
    return float(np.max(dx[keep] / dt[keep] ** gamma))


def holder_seminorm(field_, gamma, pair_policy=AllPairs()):
    """Discrete Holder seminorm ``max |X(t) - X(s)| / |t - s|**gamma``.

    Parameters
    ----------
    field_ : SampledField
        Needs ``m >= 2``.
    gamma : float
        Exponent in ``(0, 1]``.
    pair_policy : AllPairs or Sampled
        ``AllPairs`` scans every pair; ``Sampled(count, seed)`` draws a
        seeded random subset and therefore never exceeds the full value.
    """
    field_ = _as_field(field_)
    if field_.m < 2:
        raise ValueError("need at least two grid points per axis")
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    pts = field_.points()
    if isinstance(pair_policy, Sampled):
        rng = np.random.default_rng(pair_policy.seed)
        N = pts.shape[0]
        i = rng.integers(0, N, pair_policy.count)
        j = rng.integers(0, N - 1, pair_policy.count)
        j = j + (j >= i)
        return holder_seminorm_pairs(pts, field_.params(), gamma, i, j)
    if field_.k == 1:
        return _holder_all_pairs_1d(pts, gamma)
    t = field_.params()
    best = 0.0
    for start in range(0, pts.shape[0], _PAIR_BLOCK):
        dx = np.linalg.norm(pts[start:start + _PAIR_BLOCK, None, :] - pts[None, :, :], axis=-1)
        dt = np.linalg.norm(t[start:start + _PAIR_BLOCK, None, :] - t[None, :, :], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dt > 0, dx / dt**gamma, 0.0)
        best = max(best, float(ratio.max()))
    return best


# ------------------------------------------------------------ box counting


@dataclass
class BoxDimensionResult:
    """Box-counting estimate with the fit diagnostics behind it."""

    estimate: float
    r_squared: float
    scales: np.ndarray
    counts: np.ndarray
    window: tuple
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "r_squared": self.r_squared,
            "scales": self.scales.tolist(),
            "counts": self.counts.tolist(),
            "window": list(self.window),
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


def default_scales(diameter, count=12):
    """Dyadic scales ``diameter * 2**-j`` for ``j = 1..count``."""
    return diameter * 2.0 ** -np.arange(1, count + 1)


def densify_polyline(points, max_step):
    """Insert equally spaced points on each segment so no gap exceeds ``max_step``."""
    pts = check_points(points)
    if pts.shape[0] < 2:
        return pts
    seg = np.diff(pts, axis=0)
    length = np.linalg.norm(seg, axis=1)
    pieces = np.maximum(np.ceil(length / max_step).astype(int), 1)
    out = [pts[:1]]
    for a, d, p in zip(pts[:-1], seg, pieces):
        frac = np.arange(1, p + 1)[:, None] / p
        out.append(a + frac * d)
    return np.vstack(out)


def _box_count(pts, lo, eps, diameter):
    top = max(int(np.ceil(diameter / eps)) - 1, 0)
    idx = np.clip(np.floor((pts - lo) / eps).astype(np.int64), 0, top)
    return np.unique(idx, axis=0).shape[0]


def _fit(logx, logy):
    A = np.vstack([logx, np.ones_like(logx)]).T
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def box_dimension(points, scales=None, polyline=False, min_window=4, saturation=0.25):
    """Box-counting dimension by least squares of ``log N(eps)`` on ``log(1/eps)``.

    Boxes live on a lattice anchored at the lower corner of the bounding box.
    Scales whose count exceeds ``saturation`` times the number of input
    points are dropped (the cloud is resolved into isolated points there).
    Among the remaining scales, the contiguous window of at least
    ``min_window`` scales with the best coefficient of determination is used;
    windows within ``1e-3`` of the best prefer more scales.

    Parameters
    ----------
    points : array_like, shape (N, n)
    scales : array_like, optional
        Box sides. Default ``diameter * 2**-j``, ``j = 1..12``.
    polyline : bool
        Treat the points as consecutive vertices of a curve and count boxes
        met by the segments (densified to a quarter of the smallest scale).
        Instead of the saturation rule, scales below the median segment
        length are dropped: the polygon carries no information finer than
        its sampling.
    """
    pts = check_points(points)
    lo = pts.min(axis=0)
    diameter = float(np.max(pts.max(axis=0) - lo))
    if diameter == 0.0:
        return BoxDimensionResult(0.0, 1.0, np.zeros(0), np.zeros(0, int), (0, 0), True,
                                  ["cloud has zero diameter"])
    scales = default_scales(diameter) if scales is None else np.sort(np.asarray(scales, float))[::-1]
    notes = []
    n_raw = pts.shape[0]
    if polyline:
        pts = densify_polyline(pts, scales.min() / 4.0)
    counts = np.array([_box_count(pts, lo, eps, diameter) for eps in scales])
    if polyline:
        seg = np.median(np.linalg.norm(np.diff(check_points(points), axis=0), axis=1))
        keep = scales >= seg
        if not np.all(keep):
            notes.append(f"dropped {int(np.sum(~keep))} scales below the median segment length")
    else:
        keep = counts <= saturation * n_raw
        if not np.all(keep):
            notes.append(f"dropped {int(np.sum(~keep))} saturated scales")
    idx = np.nonzero(keep)[0]
    logx = np.log(1.0 / scales)
    logy = np.log(counts.astype(float))
    if idx.size < 2:
        notes.append("fewer than two usable scales")
        return BoxDimensionResult(float("nan"), float("nan"), scales, counts, (0, 0), False, notes)
    best = None
    width = min(min_window, idx.size)
    # contiguous runs only
    for a in range(idx.size):
        for b in range(a + width, idx.size + 1):
            sel = idx[a:b]
            if sel[-1] - sel[0] != b - a - 1:
                continue
            slope, r2 = _fit(logx[sel], logy[sel])
            cand = (r2, b - a, slope, (int(sel[0]), int(sel[-1]) + 1))
            if best is None or cand[0] > best[0] + 1e-3 or (
                abs(cand[0] - best[0]) <= 1e-3 and cand[1] > best[1]
            ):
                best = cand
    if best is None:
        notes.append("no contiguous window of usable scales")
        return BoxDimensionResult(float("nan"), float("nan"), scales, counts, (0, 0), False, notes)
    r2, _, slope, window = best
    return BoxDimensionResult(slope, r2, scales, counts, window, False, notes)


# ------------------------------------------------------- oscillation moduli


def _local_oscillation(x, L):
    """``max_{1<=|d|<=L} |x[i+d] - x[i]|`` for every index (edges use the side available)."""
    m = x.shape[0]
    out = np.zeros(m)
    for d in range(1, L + 1):
        if d >= m:
            break
        step = np.linalg.norm(x[d:] - x[:-d], axis=1)
        np.maximum(out[:-d], step, out=out[:-d])
        np.maximum(out[d:], step, out=out[d:])
    return out


@dataclass
class OscillationReport:
    """Upper and lower oscillation statistics per scale ``h``."""

    h: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    upper_ratio: np.ndarray
    lower_ratio: np.ndarray
    kappa_plus: float
    kappa_minus: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "h": self.h.tolist(),
            "upper": self.upper.tolist(),
            "lower": self.lower.tolist(),
            "upper_ratio": self.upper_ratio.tolist(),
            "lower_ratio": self.lower_ratio.tolist(),
            "kappa_plus": self.kappa_plus,
            "kappa_minus": self.kappa_minus,
            "notes": list(self.notes),
        }


def oscillation_moduli(field_, h_values, kappa_plus, kappa_minus):
    """Upper and lower oscillation statistics of a curve at scales ``h``.

    For each ``h`` the local oscillation at ``t`` is
    ``sup_{0<|t-s|<=h} |X(t) - X(s)|``; the upper statistic is its maximum
    and the lower statistic its minimum over grid ``t`` in ``[h, 1-h]``.
    Ratios against ``h**kappa_plus`` and ``h**kappa_minus`` are reported.
    Scales below the grid spacing are skipped with a note.
    """
    field_ = _as_field(field_)
    if field_.k != 1:
        raise ValueError("oscillation moduli need a one-parameter field")
    x = field_.points()
    m = field_.m
    spacing = 1.0 / (m - 1)
    hs, up, low, notes = [], [], [], []
    for h in np.asarray(h_values, dtype=float).ravel():
        if not (0.0 < h < 0.5):
            raise ValueError(f"h must lie in (0, 1/2), got {h}")
        L = int(np.floor(h / spacing + 1e-9))
        if L < 1:
            notes.append(f"h={h:g} below grid resolution, skipped")
            continue
        osc = _local_oscillation(x, L)
        inner = osc[L:m - L]
        if inner.size == 0:
            notes.append(f"h={h:g} leaves no interior points, skipped")
            continue
        hs.append(h)
        up.append(float(inner.max()))
        low.append(float(inner.min()))
    hs = np.asarray(hs)
    up = np.asarray(up)
    low = np.asarray(low)
    return OscillationReport(hs, up, low, up / hs**kappa_plus, low / hs**kappa_minus,
                             float(kappa_plus), float(kappa_minus), notes)


# ----------------------------------------------------- bounded potential


def discrete_occupation_potential(field_, alpha):
    """``U(t_i) = (1/m) sum_{j != i} |X_i - X_j|**(alpha - n)`` for a curve.

    Coincident samples make the value ``+inf``.
    """
    x = field_.points()
    n = field_.n
    check_riesz_order(alpha, n)
    m = x.shape[0]
    out = np.empty(m)
    for start in range(0, m, _PAIR_BLOCK):
        d = np.linalg.norm(x[start:start + _PAIR_BLOCK, None, :] - x[None, :, :], axis=-1)
        rows = np.arange(d.shape[0])
        d[rows, start + rows] = np.inf
        with np.errstate(divide="ignore"):
            out[start:start + _PAIR_BLOCK] = np.sum(np.power(d, alpha - n), axis=1) / m
    return out


@dataclass
class BdpotReport:
    """Bounded-potential versus lower-oscillation diagnostic."""

    potential_sup: float
    h: np.ndarray
    lower: np.ndarray
    lower_ratio: np.ndarray
    proof_bound: np.ndarray
    flagged: bool
    reasons: list

    def to_dict(self):
        return {
            "potential_sup": self.potential_sup,
            "h": self.h.tolist(),
            "lower": self.lower.tolist(),
            "lower_ratio": self.lower_ratio.tolist(),
            "proof_bound": self.proof_bound.tolist(),
            "flagged": self.flagged,
            "reasons": list(self.reasons),
        }


def bdpot_diagnostic(field_, alpha, kappa_minus, h_values=None):
    """Compare the occupation potential with the lower oscillation statistic.

    If the lower statistic at scale ``h`` is ``l(h)``, some ``t`` has
    ``|X(t) - X(s)| <= l(h)`` for ``|t - s| <= h``, so the potential at
    ``X(t)`` is at least ``2 h l(h)**(alpha - n)``. The report lists that
    bound next to the discrete potential supremum and flags the instance
    when the potential is infinite, a lower statistic vanishes, or a bound
    exceeds the supremum.

    Parameters
    ----------
    field_ : SampledField
        One-parameter field.
    alpha : float
        Riesz order, ``0 < alpha < n``.
    kappa_minus : float
        Lower-modulus exponent; must exceed ``1 / (n - alpha)``.
    h_values : array_like, optional
        Default: dyadic ``2**-j`` down to the grid spacing.
    """
    field_ = _as_field(field_)
    n = field_.n
    check_riesz_order(alpha, n)
    if not kappa_minus > 1.0 / (n - alpha):
        raise ValueError(
            f"kappa_minus must exceed 1/(n - alpha) = {1.0 / (n - alpha):.6g}, got {kappa_minus}"
        )
    if h_values is None:
        spacing = 1.0 / (field_.m - 1)
        j = np.arange(2, 64)
        h_values = 2.0 ** -j
        h_values = h_values[h_values >= spacing]
    pot = discrete_occupation_potential(field_, alpha)
    u_sup = float(np.max(pot))
    osc = oscillation_moduli(field_, h_values, 1.0, kappa_minus)
    with np.errstate(divide="ignore"):
        bound = 2.0 * osc.h * np.power(osc.lower, alpha - n)
    reasons = []
    if not np.isfinite(u_sup):
        reasons.append("discrete potential is infinite (coincident samples)")
    if np.any(osc.lower == 0.0):
        reasons.append("lower oscillation statistic vanishes at some scale")
    if np.isfinite(u_sup) and np.any(bound > u_sup * (1.0 + 1e-9)):
        reasons.append("lower statistic too small for the potential supremum")
    return BdpotReport(u_sup, osc.h, osc.lower, osc.lower_ratio, bound, bool(reasons), reasons)
