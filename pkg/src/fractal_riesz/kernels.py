"""Riesz and Bessel kernels.

The Riesz kernel of order ``alpha`` in ``R^n`` is ``|x|**(alpha - n)``,
without the customary multiplicative constant. The Bessel kernel ``g_alpha``
is the kernel of ``(1 - Laplacian)**(-alpha/2)``, i.e. the function whose
Fourier transform is ``(1 + |xi|**2)**(-alpha/2)``.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from ._validation import check_points, check_positive_int

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "riesz_kernel",
    "riesz_kernel_radial",
    "bessel_kernel",
    "bessel_kernel_radial",
    "kernel_comparison_constant",
]


class KernelFamily(str, Enum):
    RIESZ = "riesz"
    BESSEL = "bessel"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, order and ambient dimension."""

    family: KernelFamily
    alpha: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        check_positive_int(self.n, "n")
        if self.family is KernelFamily.RIESZ and not (0.0 < self.alpha < self.n):
            raise ValueError(
                f"Riesz kernel needs 0 < alpha < n, got alpha={self.alpha}, n={self.n}"
            )
        if self.family is KernelFamily.BESSEL and not self.alpha > 0.0:
            raise ValueError(f"Bessel kernel needs alpha > 0, got {self.alpha}")

    @classmethod
    def riesz(cls, alpha, n):
        return cls(KernelFamily.RIESZ, float(alpha), int(n))

    @classmethod
    def bessel(cls, alpha, n):
        return cls(KernelFamily.BESSEL, float(alpha), int(n))


def riesz_kernel_radial(r, alpha, n):
    """``r**(alpha - n)`` with ``+inf`` at ``r == 0``; vectorized over ``r``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.power(r, alpha - n)
    return np.where(r == 0.0, np.inf, out)


def riesz_kernel(spec, x):
    """Evaluate ``k_alpha(x) = |x|**(alpha - n)``.

    ``x`` may be one point of length ``spec.n`` or an ``(N, n)`` array; the
    return value is a float or an array of length ``N``. The kernel is
    ``+inf`` at the origin.
    """
    if spec.family is not KernelFamily.RIESZ:
        raise ValueError("riesz_kernel needs a Riesz KernelSpec")
    single = np.ndim(x) <= 1
    pts = check_points(x, spec.n)
    vals = riesz_kernel_radial(np.linalg.norm(pts, axis=1), spec.alpha, spec.n)
    return float(vals[0]) if single else vals


def _bessel_prefactor(alpha):
    return 1.0 / ((4.0 * np.pi) ** (alpha / 2.0) * special.gamma(alpha / 2.0))


def _bessel_at_zero(alpha, n):
    if alpha <= n:
        return np.inf
    return special.gamma((alpha - n) / 2.0) / (
        (4.0 * np.pi) ** (n / 2.0) * special.gamma(alpha / 2.0)
    )


def _bessel_macdonald(r, alpha, n):
    # Closed form of the subordination integral:
    # int_0^inf d^(nu-1) exp(-a/d - b d) dd = 2 (a/b)^(nu/2) K_nu(2 sqrt(ab))
    # with a = pi r^2, b = 1/(4 pi), nu = (alpha - n)/2.
    nu = (alpha - n) / 2.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = (
            2.0
            * _bessel_prefactor(alpha)
            * (2.0 * np.pi * r) ** nu
            * special.kv(nu, r)
        )
    return val


@lru_cache(maxsize=4096)
def _bessel_quad_scalar(r, alpha, n):
    nu = (alpha - n) / 2.0
    a = np.pi * r * r

    def integrand(d):
        return d ** (nu - 1.0) * np.exp(-a / d - d / (4.0 * np.pi))

    # The integrand peaks near d* ~ 2 pi r; split there for robustness.
    peak = max(2.0 * np.pi * r, 1e-12)
    left, err1 = integrate.quad(integrand, 0.0, peak, limit=200, epsabs=0.0, epsrel=1e-10)
    right, err2 = integrate.quad(integrand, peak, np.inf, limit=200, epsabs=0.0, epsrel=1e-10)
    return _bessel_prefactor(alpha) * (left + right)


def bessel_kernel_radial(r, alpha, n, method="closed"):
    """Radial profile ``g_alpha(r)`` of the Bessel kernel in ``R^n``.

    Parameters
    ----------
    r : array_like
        Radii ``>= 0``.
    alpha : float
        Order, ``alpha > 0``.
    n : int
        Ambient dimension.
    method : {"closed", "quad"}
        ``"quad"`` integrates the subordination representation
        ``c * int_0^inf d**((alpha-n)/2 - 1) exp(-pi r**2/d - d/(4 pi)) dd``
        adaptively; ``"closed"`` evaluates the same integral through the
        Macdonald function ``K_nu`` and is vectorized.

    Returns
    -------
    ndarray or float
        Kernel values; ``+inf`` at ``r == 0`` when ``alpha <= n``.
    """
    if alpha <= 0:
        raise ValueError(f"Bessel kernel needs alpha > 0, got {alpha}")
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("radii must be nonnegative")
    out = np.empty_like(r)
    zero = r == 0.0
    out[zero] = _bessel_at_zero(alpha, n)
    pos = ~zero
    if method == "closed":
        out[pos] = _bessel_macdonald(r[pos], alpha, n)
        # kv underflows to 0 far out; that is the correct limit.
        out[pos] = np.nan_to_num(out[pos], nan=0.0, posinf=np.inf)
    elif method == "quad":
        out[pos] = [_bessel_quad_scalar(float(ri), float(alpha), int(n)) for ri in r[pos]]
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if scalar else out


def bessel_kernel(spec, x, method="closed"):
    """Evaluate the Bessel kernel ``g_alpha(x)``.

    At ``x = 0`` the value is ``+inf`` when ``alpha <= n`` (singular) and the
    finite limit ``Gamma((alpha-n)/2) / ((4 pi)^(n/2) Gamma(alpha/2))``
    otherwise.
    """
    if spec.family is not KernelFamily.BESSEL:
        raise ValueError("bessel_kernel needs a Bessel KernelSpec")
    single = np.ndim(x) <= 1
    pts = check_points(x, spec.n)
    vals = bessel_kernel_radial(np.linalg.norm(pts, axis=1), spec.alpha, spec.n, method=method)
    return float(vals[0]) if single else vals


def kernel_comparison_constant(alpha, n, R, grid):
    """Empirical constant ``c_R`` with ``k_alpha(r) <= c_R g_alpha(r)`` on ``grid``.

    Returns the maximum of ``k_alpha(r) / g_alpha(r)`` over the sample radii
    in ``(0, R)``. This is a grid estimate, not a certified bound.
    """
    if not (0.0 < alpha < n):
        raise ValueError(f"need 0 < alpha < n, got alpha={alpha}, n={n}")
    if R <= 0:
        raise ValueError("R must be positive")
    grid = np.asarray(grid, dtype=float).ravel()
    grid = grid[(grid > 0.0) & (grid < R)]
    if grid.size == 0:
        raise ValueError("grid has no radii inside (0, R)")
    ratio = riesz_kernel_radial(grid, alpha, n) / bessel_kernel_radial(grid, alpha, n)
    return float(np.max(ratio))
