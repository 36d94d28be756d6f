"""K-means clustering with BIC model selection and cross-run cluster matching.

The estimator is deliberately self-contained and fully deterministic: seeded
k-means++ initialization, Lloyd iterations with a pinned tolerance, a fixed
number of restarts reduced by (inertia, restart index), and farthest-point
reseeding for clusters that empty out mid-run. Determinism is what makes twin
ticks reproducible and the cross-tick identity matching meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from skytwin.validation import check_array, check_is_fitted

_WCSS_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """A fitted clustering: centroids live in the scaled feature space."""

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    wcss: float
    bic: float
    seed: int
    iterations_run: int
    degraded: bool = False

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _pairwise_sq(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # direct (x - c)^2 form: matches the obvious linear-scan computation bit
    # for bit, so tie-breaking is reproducible against reference code
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def assign(centroids: np.ndarray, point: np.ndarray) -> int:
    """Index of the nearest centroid by squared distance; ties take the lowest index."""
    centroids = np.asarray(centroids, dtype=np.float64)
    point = np.asarray(point, dtype=np.float64)
    d = ((centroids - point[None, :]) ** 2).sum(axis=1)
    return int(np.argmin(d))


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    closest_sq = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # coincident points: any choice is equivalent
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centroids[j] = X[idx]
        closest_sq = np.minimum(closest_sq, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float, list[float], int]:
    n, d = X.shape
    centroids = _kmeanspp_init(X, k, rng)
    labels = np.zeros(n, dtype=np.intp)
    wcss_history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        dist_sq = _pairwise_sq(X, centroids)
        labels = dist_sq.argmin(axis=1)
        wcss = float(dist_sq[np.arange(n), labels].sum())
        if wcss_history:
            # Lloyd steps cannot worsen the objective
            assert wcss <= wcss_history[-1] * (1 + 1e-12) + 1e-12
        wcss_history.append(wcss)

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = X[labels == j].mean(axis=0)
        reseeded = self_heal_empty(X, new_centroids, counts)

        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < tol and not reseeded:
            break

    dist_sq = _pairwise_sq(X, centroids)
    labels = dist_sq.argmin(axis=1)
    wcss = float(dist_sq[np.arange(n), labels].sum())
    if wcss_history:
        assert wcss <= wcss_history[-1] * (1 + 1e-12) + 1e-12
    wcss_history.append(wcss)
    return labels, centroids, wcss, wcss_history, iterations


def self_heal_empty(X: np.ndarray, centroids: np.ndarray, counts: np.ndarray) -> bool:
    """Reseed each empty cluster to the point farthest from its stale centroid.

    Skips the reseed when every point coincides with the centroid (a fully
    degenerate column of duplicates): there is nothing to separate.
    Returns whether any reseed happened.
    """
    reseeded = False
    used: set[int] = set()
    for j in np.flatnonzero(counts == 0):
        d = ((X - centroids[j]) ** 2).sum(axis=1)
        if used:
            d = d.copy()
            d[list(used)] = -np.inf
        far = int(d.argmax())
        if d[far] <= 0.0:
            continue
        centroids[j] = X[far]
        used.add(far)
        reseeded = True
    return reseeded


class KMeans:
    """Seeded, restart-reduced Lloyd's algorithm with k-means++ initialization.

    Attributes after ``fit``: ``cluster_centers_``, ``labels_``, ``inertia_``
    (within-cluster sum of squared distances), ``n_iter_`` and
    ``wcss_history_`` for the winning restart.
    """

    def __init__(
        self,
        n_clusters: int = 8,
        *,
        random_state: int = 0,
        n_init: int = 10,
        max_iter: int = 100,
        tol: float = 1e-6,
    ) -> None:
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol
        self.cluster_centers_: np.ndarray | None = None
        self.labels_: np.ndarray | None = None
        self.inertia_: float | None = None
        self.n_iter_: int | None = None
        self.wcss_history_: list[float] | None = None

    def fit(self, X) -> "KMeans":
        arr = check_array(X, name="X")
        n = arr.shape[0]
        if not 1 <= self.n_clusters <= n:
            raise ValueError(f"n_clusters={self.n_clusters} must be in [1, {n}]")
        best: tuple[float, int] | None = None
        for restart in range(self.n_init):
            rng = np.random.default_rng([self.random_state, restart])
            labels, centroids, wcss, history, iters = _lloyd(
                arr, self.n_clusters, rng, self.max_iter, self.tol
            )
            key = (wcss, restart)
            if best is None or key < best:
                best = key
                self.labels_ = labels
                self.cluster_centers_ = centroids
                self.inertia_ = wcss
                self.n_iter_ = iters
                self.wcss_history_ = history
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cluster_centers_")
        arr = check_array(X, name="X")
        return _pairwise_sq(arr, self.cluster_centers_).argmin(axis=1)

    def fit_predict(self, X) -> np.ndarray:
        return self.fit(X).labels_

    def get_params(self, deep: bool = True) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "random_state": self.random_state,
            "n_init": self.n_init,
            "max_iter": self.max_iter,
            "tol": self.tol,
        }

    def set_params(self, **params) -> "KMeans":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self


def kmeans_fit(m, k: int, seed: int) -> ClusterModel:
    """Fit a k-cluster model on scaled features; deterministic given (m, k, seed)."""
    arr = check_array(m, name="m")
    est = KMeans(n_clusters=k, random_state=seed).fit(arr)
    model = ClusterModel(
        k=k,
        centroids=est.cluster_centers_,
        assignments=est.labels_,
        wcss=est.inertia_,
        bic=math.nan,
        seed=seed,
        iterations_run=est.n_iter_,
    )
    if arr.shape[0] > k:
        model = _replace(model, bic=bic(arr, model))
    return model


def bic(m, model: ClusterModel) -> float:
    """Bayesian information criterion of a fitted model; lower is better.

    Spherical-Gaussian form: n*d*ln(max(wcss, eps)/(n*d)) + k*(d+1)*ln(n).
    """
    arr = check_array(m, name="m")
    n, d = arr.shape
    if n <= model.k:
        raise ValueError(f"BIC needs n > k, got n={n}, k={model.k}")
    return n * d * math.log(max(model.wcss, _WCSS_EPS) / (n * d)) + model.k * (d + 1) * math.log(n)


def select_k(m, k_range: tuple[int, int] | None = None, seed: int = 0) -> ClusterModel:
    """Fit every k in range and keep the lowest-BIC model (ties favor small k).

    The range is clipped to the feasible [1, n-1]; when nothing is feasible
    (n <= 2 or an empty clip) the result is a single-cluster model flagged
    degraded.
    """
    arr = check_array(m, name="m")
    n = arr.shape[0]
    if k_range is None:
        k_range = (2, min(10, n - 1))
    lo = max(1, k_range[0])
    hi = min(k_range[1], n - 1)
    if n <= 2 or lo > hi:
        model = kmeans_fit(arr, 1, seed)
        return _replace(model, degraded=True)
    best: ClusterModel | None = None
    for k in range(lo, hi + 1):
        model = kmeans_fit(arr, k, seed)
        if best is None or model.bic < best.bic:
            best = model
    return best


def match_clusters(prev_centroids: np.ndarray, new_centroids: np.ndarray) -> dict[int, int]:
    """Minimum total squared-distance matching of new clusters onto previous ones.

    Returns a partial injective map {new index -> previous index} of size
    min(k_prev, k_new); unmatched new clusters are simply absent. Both inputs
    must live in a directly comparable space.
    """
    prev = np.asarray(prev_centroids, dtype=np.float64)
    new = np.asarray(new_centroids, dtype=np.float64)
    if prev.size == 0 or new.size == 0:
        return {}
    cost = ((new[:, None, :] - prev[None, :, :]) ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return {int(r): int(c) for r, c in zip(rows, cols)}
