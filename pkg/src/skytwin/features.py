"""Clustering feature extraction and min-max scaling.

The feature space is (longitude, latitude, altitude): position drives which
aircraft can form a connectivity cluster. Features are rescaled to [0, 1]
per column before clustering so degrees and meters carry comparable weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from skytwin.projection import ProjectedState
from skytwin.validation import check_array, check_is_fitted

FEATURE_NAMES = ("longitude", "latitude", "altitude")


class EmptyMatrixError(ValueError):
    """No aircraft were eligible for clustering this tick."""


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows are aircraft sorted by icao24; columns are (lon deg, lat deg, alt m)."""

    values: np.ndarray
    row_keys: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] != len(FEATURE_NAMES):
            raise ValueError(f"feature matrix must be n x {len(FEATURE_NAMES)}")
        if self.values.shape[0] != len(self.row_keys):
            raise ValueError("row_keys length must match the number of rows")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def row_index(self) -> dict[str, int]:
        return {key: i for i, key in enumerate(self.row_keys)}


def extract_features(states: Iterable[ProjectedState]) -> FeatureMatrix:
    """Build the clustering matrix from projected states.

    Grounded and stale aircraft are left out; what remains is sorted by
    icao24 so the row order is reproducible.
    """
    eligible = sorted(
        (s for s in states if not s.stale and not s.base.on_ground),
        key=lambda s: s.icao24,
    )
    if not eligible:
        raise EmptyMatrixError("no airborne, non-stale aircraft to cluster")
    values = np.array(
        [[s.longitude, s.latitude, s.altitude] for s in eligible], dtype=np.float64
    )
    return FeatureMatrix(values=values, row_keys=tuple(s.icao24 for s in eligible))


class MinMaxScaler:
    """Rescale each column to [0, 1] over the fitted data.

    A zero-range column maps to 0.0 everywhere. ``inverse_transform`` recovers
    raw units (for a zero-range column it returns the fitted constant).
    """

    def __init__(self) -> None:
        self.data_min_: np.ndarray | None = None
        self.data_max_: np.ndarray | None = None

    def fit(self, X) -> "MinMaxScaler":
        arr = check_array(X, name="X")
        self.data_min_ = arr.min(axis=0)
        self.data_max_ = arr.max(axis=0)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "data_min_")
        arr = check_array(X, name="X")
        if arr.shape[1] != self.data_min_.shape[0]:
            raise ValueError(
                f"X has {arr.shape[1]} columns, scaler was fitted on {self.data_min_.shape[0]}"
            )
        span = self.data_max_ - self.data_min_
        nonzero = span > 0
        # true division: correctly rounded, so fit-matrix outputs stay in [0, 1]
        return np.where(nonzero, (arr - self.data_min_) / np.where(nonzero, span, 1.0), 0.0)

    def fit_transform(self, X) -> np.ndarray:
        return self.fit(X).transform(X)

    def inverse_transform(self, X) -> np.ndarray:
        check_is_fitted(self, "data_min_")
        arr = check_array(X, name="X", min_rows=0)
        span = self.data_max_ - self.data_min_
        return arr * span + self.data_min_

    def get_params(self, deep: bool = True) -> dict:
        return {}

    def set_params(self, **params) -> "MinMaxScaler":
        if params:
            raise ValueError(f"unknown parameters: {sorted(params)}")
        return self


def fit_minmax(m: FeatureMatrix | np.ndarray) -> MinMaxScaler:
    return MinMaxScaler().fit(m)


def transform(scaler: MinMaxScaler, m: FeatureMatrix | np.ndarray) -> np.ndarray:
    return scaler.transform(m)
