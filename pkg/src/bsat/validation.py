"""Input validation helpers shared by the estimator layer."""

from __future__ import annotations

import numpy as np


def as_series(X) -> np.ndarray:
    """Coerce to a finite 1-D float series."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains non-finite values")
    return arr


def as_windows(X, lookback: int) -> np.ndarray:
    """Coerce to a finite (m, lookback) window matrix; 1-D input becomes one row."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected windows of shape (m, {lookback}), got {arr.shape}")
    if arr.shape[1] != lookback:
        raise ValueError(
            f"window length {arr.shape[1]} does not match lookback {lookback}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("windows contain non-finite values")
    return arr
