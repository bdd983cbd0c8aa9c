"""Mahalanobis-type depth measures and the perturbation budget they imply.

Depth is 1 at the centre of the data and decays towards 0 for outlying
points. Three flavours are provided:

* ``mahalanobis_depth``: the usual ``1 / (1 + squared Mahalanobis distance)``
  against one sample cloud;
* ``mdc``: the sum of those depths over several clusters, so a point is
  shallow only if it is far from all of them;
* ``comd``: the per-coordinate (1-D) version of ``mdc`` minimised over
  coordinates. It never inverts a full covariance matrix, which keeps it
  usable when ``m`` is large compared with the cluster sizes.

Covariances use the unbiased ``n - 1`` estimator throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .clustering import ClusterAssignment
from .data import Dataset


class DepthError(ValueError):
    pass


class SingularCovarianceError(DepthError):
    pass


class TargetBelowFloor(DepthError):
    """The attack target is already at or past the outlier floor."""


def _values(X) -> np.ndarray:
    return X.values if isinstance(X, Dataset) else np.atleast_2d(np.asarray(X, dtype=float))


def mahalanobis_depth(x, X) -> float:
    return float(mahalanobis_depths(x, X)[0])


def mahalanobis_depths(points, X) -> np.ndarray:
    """Depth of each row of ``points`` against the cloud ``X``."""
    values = _values(X)
    n, m = values.shape
    if n <= m:
        raise SingularCovarianceError(
            f"covariance of {n} samples in {m} dimensions is singular; use comd instead"
        )
    mean = values.mean(axis=0)
    # QR of the centred cloud: cov = R^T R / (n-1) without squaring the condition number
    r = np.linalg.qr(values - mean, mode="r")
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise SingularCovarianceError(
            "sample covariance is not positive definite; use comd instead"
        )
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = solve_triangular(r, (pts - mean).T, trans="T") * np.sqrt(n - 1)
    return 1.0 / (1.0 + (z * z).sum(axis=0))


def mdc(x, clusters: Sequence) -> float:
    """Sum of per-cluster Mahalanobis depths of ``x``."""
    return float(sum(mahalanobis_depth(x, c) for c in clusters))


@dataclass(frozen=True)
class ColumnStats:
    """Per-cluster, per-coordinate means and unbiased variances (2 x m)."""

    means: np.ndarray
    variances: np.ndarray

    @classmethod
    def of(cls, X, clusters: ClusterAssignment) -> "ColumnStats":
        values = _values(X)
        means, variances = [], []
        for k in (0, 1):
            block = values[clusters.members(k)]
            means.append(block.mean(axis=0))
            if block.shape[0] > 1:
                variances.append(block.var(axis=0, ddof=1))
            else:
                variances.append(np.zeros(values.shape[1]))
        stats = cls(np.vstack(means), np.vstack(variances))
        if stats.skipped.any():
            warnings.warn(
                f"{int(stats.skipped.sum())} constant coordinate(s) ignored by comd",
                stacklevel=3,
            )
        if stats.skipped.all():
            raise DepthError("every coordinate is constant within every cluster")
        return stats

    @property
    def skipped(self) -> np.ndarray:
        return (self.variances == 0).all(axis=0)

    def coordinate_mdc(self, points) -> np.ndarray:
        """1-D MDC of every coordinate of every point, shape ``(p, m)``.

        A cluster with zero spread in a coordinate contributes its limiting
        depth: 1 exactly at its constant value, 0 anywhere else.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(points.shape)
        for mu, var in zip(self.means, self.variances):
            diff2 = (points - mu) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                t = 1.0 / (1.0 + diff2 / var)
            flat = var == 0
            t[:, flat] = (diff2[:, flat] == 0).astype(float)
            total += t
        total[:, self.skipped] = np.inf
        return total

    def comd(self, points) -> np.ndarray:
        return self.coordinate_mdc(points).min(axis=1)


def comd(x, X, clusters: ClusterAssignment) -> float:
    """Coordinate-wise minimum MDC of ``x`` against the clusters of ``X``."""
    return float(ColumnStats.of(X, clusters).comd(x)[0])


@dataclass(frozen=True)
class DepthReport:
    """COMD of every sample, with the empirical quantile convention
    ``quantile_of(v) = #{samples with COMD <= v} / n``."""

    per_sample_comd: np.ndarray

    def quantile_of(self, value: float) -> float:
        s = np.sort(self.per_sample_comd)
        return float(np.searchsorted(s, value, side="right") / s.size)

    def floor(self, quantile: float) -> float:
        """Smallest sample COMD whose quantile reaches ``quantile``."""
        if not 0 < quantile <= 1:
            raise DepthError(f"quantile must be in (0, 1], got {quantile}")
        s = np.sort(self.per_sample_comd)
        k = int(np.ceil(quantile * s.size - 1e-12)) - 1
        return float(s[max(k, 0)])


def depth_report(X, clusters: ClusterAssignment) -> DepthReport:
    return DepthReport(ColumnStats.of(X, clusters).comd(_values(X)))


@dataclass(frozen=True)
class PerturbationBox:
    """Feasible perturbations ``-delta_j <= eps_j <= delta_j``."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.delta, dtype=float)).copy()
        if d.ndim != 1 or not np.all(np.isfinite(d)) or (d < 0).any():
            raise DepthError("delta must be a finite vector with non-negative entries")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def m(self) -> int:
        return self.delta.size

    @property
    def lower(self) -> np.ndarray:
        return -self.delta

    @property
    def upper(self) -> np.ndarray:
        return self.delta

    def contains(self, eps) -> bool:
        return bool(np.all(np.abs(np.asarray(eps, dtype=float)) <= self.delta))

    @classmethod
    def uniform(cls, value: float, m: int) -> "PerturbationBox":
        return cls(np.full(m, float(value)))


def axis_probes(center: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """The 2m points ``center +/- delta_j e_j``."""
    eye = np.diag(delta)
    return np.vstack([center + eye, center - eye])


def select_delta(
    X: Dataset,
    clusters: ClusterAssignment,
    target: int,
    floor_quantile: float = 0.1,
    budget_cap: Optional[np.ndarray] = None,
    max_scale: float = 4.0,
    iterations: int = 20,
) -> PerturbationBox:
    """Largest box ``s * std(X)`` whose axis probes stay above the depth floor.

    The multiplier ``s`` is bisected on ``[0, max_scale]``; the box is then
    clipped elementwise by ``budget_cap`` if one is given.
    """
    values = X.values
    if not 0 <= target < values.shape[0]:
        raise DepthError(f"target index {target} out of range")
    if floor_quantile >= 1:
        # only the deepest sample sits at the floor; nothing else is admissible
        return PerturbationBox(np.zeros(values.shape[1]))
    stats = ColumnStats.of(values, clusters)
    floor = DepthReport(stats.comd(values)).floor(floor_quantile)
    x = values[target]
    if stats.comd(x)[0] < floor:
        raise TargetBelowFloor(
            f"target {target} has COMD below the {floor_quantile} quantile ({floor:.4g})"
        )
    scale = values.std(axis=0, ddof=1)

    def ok(s):
        return bool((stats.comd(axis_probes(x, s * scale)) >= floor).all())

    if ok(max_scale):
        s = max_scale
    else:
        lo, hi = 0.0, max_scale
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        s = lo
    delta = s * scale
    if budget_cap is not None:
        delta = np.minimum(delta, np.asarray(budget_cap, dtype=float))
    return PerturbationBox(delta)
