"""Two-cluster baselines: k-means and fuzzy c-means over window embeddings.

These slot into the pipeline in place of the spectral partition, so the only
difference between a spectral run and a baseline run is the partitioner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .validation import check_embeddings

MAX_ITER = 300


@dataclass(frozen=True)
class ClusterAssignment:
    """Hard labels plus optional fuzzy memberships for a two-way clustering."""

    labels: np.ndarray = field(repr=False)  # per-node cluster id in {0, 1}
    memberships: np.ndarray | None = field(default=None, repr=False)  # (n, 2), rows sum to 1
    iterations_used: int = 0
    converged: bool = True


def _check_two_clusterable(x: np.ndarray) -> None:
    if len(x) < 2:
        raise ValueError(f"need at least two points to form two clusters, got {len(x)}")
    if np.all(x == x[0]):
        raise ValueError("all points are identical; no two-way clustering exists")


def _seed_two_centroids(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted seeding: uniform first pick, squared-distance second."""
    first = int(rng.integers(len(x)))
    d2 = ((x - x[first]) ** 2).sum(axis=1)
    second = int(rng.choice(len(x), p=d2 / d2.sum()))
    return np.stack([x[first], x[second]])


def _assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _wcss(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((x - centroids[labels]) ** 2).sum())


def kmeans_bipartition(
    embeddings,
    seed=0,
    n_restarts: int = 5,
    max_iter: int = MAX_ITER,
) -> ClusterAssignment:
    """Lloyd's k-means with k=2, distance-weighted seeding, and restarts.

    Runs n_restarts seedings from one generator and keeps the assignment with
    the lowest within-cluster sum of squares. Deterministic given the seed.
    """
    x = check_embeddings(embeddings)
    _check_two_clusterable(x)
    rng = np.random.default_rng(seed)

    best = None
    best_obj = np.inf
    for _ in range(n_restarts):
        centroids = _seed_two_centroids(x, rng)
        labels = _assign(x, centroids)
        iters = 0
        converged = False
        for iters in range(1, max_iter + 1):
            for k in range(2):
                members = labels == k
                if members.any():
                    centroids[k] = x[members].mean(axis=0)
                else:
                    # Empty cluster: restart it at the point farthest from its assignment.
                    residual = ((x - centroids[labels]) ** 2).sum(axis=1)
                    centroids[k] = x[int(residual.argmax())]
            new_labels = _assign(x, centroids)
            if np.array_equal(new_labels, labels):
                converged = True
                break
            labels = new_labels
        obj = _wcss(x, centroids, labels)
        if obj < best_obj:
            best_obj = obj
            best = ClusterAssignment(
                labels=labels.astype(np.int8), iterations_used=iters, converged=converged
            )
    return best


def fuzzy_cmeans_bipartition(
    embeddings,
    fuzzifier: float = 2.0,
    seed=0,
    max_iter: int = MAX_ITER,
    tol: float = 1e-6,
) -> ClusterAssignment:
    """Fuzzy c-means with c=2: alternating membership and centroid updates.

    Converges when the largest membership change drops below tol. Hard labels
    come from the larger membership. Points coinciding with a centroid get
    full membership in it.
    """
    if not fuzzifier > 1.0:
        raise ValueError(f"fuzzifier must exceed 1, got {fuzzifier}")
    x = check_embeddings(embeddings)
    _check_two_clusterable(x)
    rng = np.random.default_rng(seed)

    centroids = _seed_two_centroids(x, rng)
    power = 2.0 / (fuzzifier - 1.0)
    u = _fuzzy_memberships(x, centroids, power)
    iters = 0
    converged = False
    for iters in range(1, max_iter + 1):
        um = u**fuzzifier
        centroids = (um.T @ x) / um.sum(axis=0)[:, None]
        new_u = _fuzzy_memberships(x, centroids, power)
        change = float(np.abs(new_u - u).max())
        u = new_u
        if change < tol:
            converged = True
            break
    labels = u.argmax(axis=1).astype(np.int8)
    return ClusterAssignment(labels=labels, memberships=u,
                             iterations_used=iters, converged=converged)


def _fuzzy_memberships(x: np.ndarray, centroids: np.ndarray, power: float) -> np.ndarray:
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    exact = d2 == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = d2 ** (-power / 2.0)
        u = inv / inv.sum(axis=1, keepdims=True)
    hits = exact.any(axis=1)
    if hits.any():
        u[hits] = exact[hits] / exact[hits].sum(axis=1, keepdims=True)
    return u


class KMeansBipartition(BaseEstimator, ClusterMixin):
    """Estimator facade over kmeans_bipartition."""

    def __init__(self, n_restarts: int = 5, max_iter: int = MAX_ITER, random_state: int = 0):
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        result = kmeans_bipartition(
            X, seed=self.random_state, n_restarts=self.n_restarts, max_iter=self.max_iter
        )
        self.labels_ = result.labels
        self.n_iter_ = result.iterations_used
        return self


class FuzzyCMeansBipartition(BaseEstimator, ClusterMixin):
    """Estimator facade over fuzzy_cmeans_bipartition."""

    def __init__(self, fuzzifier: float = 2.0, max_iter: int = MAX_ITER,
                 tol: float = 1e-6, random_state: int = 0):
        self.fuzzifier = fuzzifier
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        result = fuzzy_cmeans_bipartition(
            X, fuzzifier=self.fuzzifier, seed=self.random_state,
            max_iter=self.max_iter, tol=self.tol,
        )
        self.labels_ = result.labels
        self.memberships_ = result.memberships
        self.n_iter_ = result.iterations_used
        return self
