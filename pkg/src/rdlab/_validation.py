"""Input validation helpers shared across modules."""

from __future__ import annotations

import numpy as np

PMF_TOL = 1e-12
# Relative margin used when enforcing open parameter intervals.
OPEN_MARGIN = 1e-9


def check_probability(x: float, name: str = "value", *, closed: bool = True) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if closed and not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    if not closed and not 0.0 < x < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {x}")
    return x


def check_pmf(probs, name: str = "pmf", tol: float = PMF_TOL) -> np.ndarray:
    """Return ``probs`` as a float array after checking it is a pmf."""
    arr = np.asarray(probs, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries (min {arr.min():.3g})")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total!r}, not 1 within {tol}")
    return arr


def check_kernel(kernel, n_from: int, name: str = "kernel", tol: float = PMF_TOL) -> np.ndarray:
    """Check that the trailing axes after the first ``n_from`` axes sum to one."""
    arr = np.asarray(kernel, dtype=float)
    if arr.ndim <= n_from:
        raise ValueError(f"{name} needs output axes beyond its {n_from} input axes")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} has negative or non-finite entries")
    sums = arr.reshape(arr.shape[:n_from] + (-1,)).sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"{name} row {idx} sums to {sums[idx]!r}")
    return arr


def check_map(f, domain: int, codomain: int, name: str = "map") -> np.ndarray:
    """A total map {0..domain-1} -> {0..codomain-1} stored as an int array."""
    arr = np.asarray(f)
    if arr.shape != (domain,):
        raise ValueError(f"{name} must have length {domain}, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError(f"{name} must contain integers")
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= codomain):
        raise ValueError(f"{name} values must lie in [0, {codomain})")
    return arr


def check_open_interval(x: float, lo: float, hi: float, name: str) -> None:
    """Enforce lo < x < hi with a small relative margin on each end."""
    lo_m = lo + OPEN_MARGIN * max(abs(lo), 1e-300)
    hi_m = hi - OPEN_MARGIN * abs(hi) if np.isfinite(hi) else hi
    if not lo_m < x < hi_m:
        raise ValueError(f"{name}={x!r} outside open interval ({lo!r}, {hi!r})")


class InfeasibleError(ValueError):
    """An admissible parameter set is empty or a resource cap is exceeded."""
