"""Input validation helpers shared by the estimators and functional API."""

import math
import warnings

import numpy as np

from .exceptions import ConfigError


def check_cloud(X, *, copy=False, clamp_reflectance=True):
    """Validate a point cloud and return it as an ``(N, 4)`` float64 array.

    Columns are ``x`` (forward), ``y`` (left), ``z`` (up) and reflectance.
    A cloud with only three columns gets a zero reflectance column.
    Reflectance outside ``[0, 1]`` is clamped with a warning.
    """
    arr = np.array(X, dtype=np.float64, copy=copy) if copy else np.asarray(X, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] not in (3, 4):
        raise ValueError(f"point cloud must have shape (N, 3) or (N, 4), got {arr.shape}")
    if arr.shape[1] == 3:
        arr = np.hstack([arr, np.zeros((arr.shape[0], 1))])
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise ValueError(f"point cloud contains non-finite values (first at row {bad})")
    refl = arr[:, 3]
    out_of_range = (refl < 0.0) | (refl > 1.0)
    if out_of_range.any():
        if not clamp_reflectance:
            raise ValueError("reflectance values outside [0, 1]")
        warnings.warn(
            f"clamped {int(out_of_range.sum())} reflectance values to [0, 1]",
            RuntimeWarning,
            stacklevel=2,
        )
        if arr is X:
            arr = arr.copy()
        arr[:, 3] = np.clip(refl, 0.0, 1.0)
    return arr


def check_range(name, bounds):
    lo, hi = (float(b) for b in bounds)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ConfigError(f"{name} must satisfy min < max, got ({lo}, {hi})")
    return lo, hi


def check_positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def check_fraction(name, value, *, allow_zero=False):
    value = float(value)
    ok = (0.0 <= value <= 1.0) if allow_zero else (0.0 < value <= 1.0)
    if not ok:
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        raise ConfigError(f"{name} must lie in {interval}, got {value}")
    return value


def cell_count(name, span, resolution, tol=1e-9):
    """Number of cells covering ``span`` at ``resolution``; must be integral."""
    n = span / resolution
    rounded = round(n)
    if rounded < 1 or abs(n - rounded) > tol * max(1.0, abs(n)):
        raise ConfigError(
            f"{name}: span {span} is not an integer multiple of resolution {resolution}"
        )
    return int(rounded)
