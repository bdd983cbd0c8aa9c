"""Two-way clustering backends: Lloyd's K-Means and Ward agglomeration.

Both backends return a :class:`ClusterModel`. Labels are canonicalised so
that the cluster holding row 0 is cluster 0; callers still compare
partitions rather than label values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset

BACKENDS = ("kmeans", "ward")


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    """Hard 2-way clustering as an ``n x 2`` one-hot membership matrix."""

    membership: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.membership)
        if y.ndim != 2 or y.shape[1] != 2:
            raise ClusteringError(f"membership must be n x 2, got {y.shape}")
        if not np.isin(y, (0, 1)).all() or not (y.sum(axis=1) == 1).all():
            raise ClusteringError("every membership row must be one-hot")
        sizes = y.sum(axis=0)
        if sizes.min() < 1:
            raise ClusteringError(f"both clusters must be non-empty, sizes {tuple(sizes)}")
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "membership", y)

    @classmethod
    def from_labels(cls, labels) -> "ClusterAssignment":
        labels = np.asarray(labels, dtype=int)
        if not np.isin(labels, (0, 1)).all():
            raise ClusteringError("labels must be 0 or 1")
        y = np.zeros((labels.size, 2), dtype=np.int8)
        y[np.arange(labels.size), labels] = 1
        return cls(y)

    @property
    def labels(self) -> np.ndarray:
        return self.membership[:, 1].astype(int)

    @property
    def n(self) -> int:
        return self.membership.shape[0]

    @property
    def cluster_sizes(self) -> tuple[int, int]:
        s = self.membership.sum(axis=0)
        return int(s[0]), int(s[1])

    def members(self, cluster: int) -> np.ndarray:
        """Row indices belonging to ``cluster``."""
        return np.flatnonzero(self.membership[:, cluster])

    def swapped(self) -> "ClusterAssignment":
        return ClusterAssignment(self.membership[:, ::-1])


@dataclass(frozen=True)
class ClusterModel:
    assignment: ClusterAssignment
    centroids: np.ndarray
    objective: float
    history: list[float] = field(default_factory=list)
    merges: Optional[list[tuple[int, int, float, int]]] = None


def centroids_of(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return np.vstack([values[labels == k].mean(axis=0) for k in (0, 1)])


def within_ss(values: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(((values - centroids[labels]) ** 2).sum())


def _canonical(labels: np.ndarray) -> np.ndarray:
    return labels if labels[0] == 0 else 1 - labels


def _model_from_labels(values, labels, **extra) -> ClusterModel:
    labels = _canonical(np.asarray(labels, dtype=int))
    c = centroids_of(values, labels)
    return ClusterModel(
        assignment=ClusterAssignment.from_labels(labels),
        centroids=c,
        objective=within_ss(values, labels, c),
        **extra,
    )


def nearest_centroid(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = ((values[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d, axis=1)


def _kmeanspp(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = values.shape[0]
    first = rng.integers(n)
    d2 = ((values - values[first]) ** 2).sum(axis=1)
    total = d2.sum()
    if total > 0:
        second = rng.choice(n, p=d2 / total)
    else:
        second = (first + 1) % n
    return values[[first, second]].copy()


def _lloyd(values, centroids, max_iter):
    """Run Lloyd iterations; returns labels, centroids and the SSE trace."""
    labels = None
    trace = []
    for _ in range(max_iter):
        new = nearest_centroid(values, centroids)
        for k in (0, 1):
            if not (new == k).any():
                # farthest point from its own centroid seeds the empty cluster
                dist = ((values - centroids[new]) ** 2).sum(axis=1)
                new[int(np.argmax(dist))] = k
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = centroids_of(values, labels)
        trace.append(within_ss(values, labels, centroids))
    return labels, centroids, trace


def kmeans(X: Dataset, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> ClusterModel:
    """2-means with k-means++ seeding and ``n_init`` restarts.

    The restart with the lowest within-cluster sum of squares wins; ties go
    to the earliest restart. ``history`` holds that restart's SSE after
    every centroid update.
    """
    values = X.values
    if values.shape[0] < 2:
        raise ClusteringError("k-means needs at least 2 samples")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, _, trace = _lloyd(values, _kmeanspp(values, rng), max_iter)
        if best is None or trace[-1] < best[1][-1]:
            best = (labels, trace)
    return _model_from_labels(values, best[0], history=best[1])


def ward(X: Dataset) -> ClusterModel:
    """Ward agglomeration cut at two clusters.

    Cluster slots are indexed by their smallest member row, so taking the
    first row-major minimum of the symmetric cost matrix breaks ties by the
    lexicographically smallest pair. Merge costs are increases in
    within-cluster sum of squares.
    """
    values = X.values
    n = values.shape[0]
    if n < 2:
        raise ClusteringError("Ward clustering needs at least 2 samples")
    sq = (values ** 2).sum(axis=1)
    cost = 0.5 * np.maximum(sq[:, None] + sq[None, :] - 2.0 * values @ values.T, 0.0)
    np.fill_diagonal(cost, np.inf)
    size = np.ones(n)
    owner = np.arange(n)
    merges = []
    for _ in range(n - 2):
        flat = int(np.argmin(cost))
        i, j = divmod(flat, n)  # i < j by the tie argument above
        dij = cost[i, j]
        ni, nj = size[i], size[j]
        nk = size
        # Lance-Williams update for Ward
        new = ((ni + nk) * cost[i] + (nj + nk) * cost[j] - nk * dij) / (ni + nj + nk)
        cost[i, :] = new
        cost[:, i] = new
        cost[i, i] = np.inf
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        size[i] = ni + nj
        size[j] = 0
        owner[owner == j] = i
        merges.append((i, j, float(dij), int(ni + nj)))
    roots = np.unique(owner)
    labels = (owner == roots[1]).astype(int)
    return _model_from_labels(values, labels, merges=merges)


def cluster(X: Dataset, backend: str = "kmeans", seed: int = 0) -> ClusterModel:
    """The clustering function handed to the attack as an opaque oracle."""
    if backend == "kmeans":
        return kmeans(X, seed=seed)
    if backend == "ward":
        return ward(X)
    raise ClusteringError(f"unknown clustering backend {backend!r}; choose from {BACKENDS}")
