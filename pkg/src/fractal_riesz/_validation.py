"""Input validation helpers shared by all modules."""

import numbers

import numpy as np


def check_points(x, n=None, name="x"):
    """Return ``x`` as a float array of shape ``(N, n)``.

    A single point (1-D array) is promoted to shape ``(1, n)``. Raises
    ``ValueError`` when the trailing dimension does not match ``n``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if n is not None and n == 1 and arr.shape[0] != 1:
            arr = arr.reshape(-1, 1)
        else:
            arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"{name} must be a point or an array of points, got ndim={arr.ndim}")
    if n is not None and arr.shape[1] != n:
        raise ValueError(f"{name} has dimension {arr.shape[1]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_point(x, n=None, name="x"):
    """Return a single point as a 1-D float array of length ``n``."""
    arr = np.asarray(x, dtype=float).ravel()
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {n}")
    return arr


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_riesz_order(alpha, n):
    """Riesz kernels need 0 < alpha < n."""
    if not (0.0 < alpha < n):
        raise ValueError(f"Riesz order alpha must satisfy 0 < alpha < n={n}, got {alpha}")
    return float(alpha)


def check_open_unit(value, name):
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return float(value)


def check_exponent(value, name):
    """Integrability exponents p, q, r in [1, inf]."""
    value = float(value)
    if not (value >= 1.0):
        raise ValueError(f"{name} must lie in [1, inf], got {value}")
    return value


def inv(value):
    """Reciprocal with the convention 1/inf = 0."""
    return 0.0 if np.isinf(value) else 1.0 / value


def rng_for(seed, index=0):
    """Independent Philox stream for ``(seed, index)``.

    Streams depend only on the pair, so results do not change with the
    number of workers that consume them.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))
