"""Input validation helpers shared by the estimator-style components."""

from __future__ import annotations

import numpy as np


def check_array(X, *, name: str = "X", min_rows: int = 1) -> np.ndarray:
    """Coerce to a 2D float64 array and reject NaN/inf and empty inputs."""
    arr = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} row(s), got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_is_fitted(estimator, attribute: str) -> None:
    if getattr(estimator, attribute, None) is None:
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
