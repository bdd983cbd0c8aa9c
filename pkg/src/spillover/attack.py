"""Single-point black-box spill-over attack on a 2-way clustering.

The adversary perturbs one sample ``x_t`` of the source cluster within a
per-feature box and looks for perturbations that drag *other*, untouched
samples from the source cluster into the destination cluster. The
clustering is only ever called as ``Dataset -> partition``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .clustering import ClusterAssignment, ClusterModel, cluster
from .data import Dataset
from .depth import ColumnStats, DepthReport, PerturbationBox, select_delta
from .optimizer import OptimBudget, anneal_minimize, cors_minimize

ClusterFn = Callable[[Dataset], Union[ClusterModel, ClusterAssignment]]


class AttackError(ValueError):
    pass


def _assignment(out) -> ClusterAssignment:
    return out.assignment if isinstance(out, ClusterModel) else out


def select_target(X: Dataset, model: ClusterModel, source: int) -> int:
    """Source-cluster row closest (Euclidean) to the other cluster's centroid."""
    members = model.assignment.members(source)
    if members.size == 0:
        raise AttackError(f"source cluster {source} is empty")
    other = model.centroids[1 - source]
    dist = np.linalg.norm(X.values[members] - other, axis=1)
    return int(members[np.argmin(dist)])


def delta_metric(Y: ClusterAssignment, Yp: ClusterAssignment) -> float:
    """``-||Y Y^T - Y' Y'^T||_F`` via the contingency table.

    The squared norm counts ordered pairs whose co-membership flips:
    ``sum n_k^2 + sum n'_l^2 - 2 sum N_kl^2``.
    """
    a, b = np.asarray(Y.membership), np.asarray(Yp.membership)
    if a.shape != b.shape:
        raise AttackError(f"partition shapes differ: {a.shape} vs {b.shape}")
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    table = a.T @ b
    sq = (a.sum(0) ** 2).sum() + (b.sum(0) ** 2).sum() - 2 * (table ** 2).sum()
    return -float(np.sqrt(sq))


def align_roles(Y: ClusterAssignment, Yp: ClusterAssignment) -> ClusterAssignment:
    """Relabel ``Yp`` so its clusters line up with ``Y``'s by maximal overlap."""
    table = np.asarray(Y.membership, dtype=np.int64).T @ np.asarray(Yp.membership, dtype=np.int64)
    if table[0, 0] + table[1, 1] >= table[0, 1] + table[1, 0]:
        return Yp
    return Yp.swapped()


def objective(X: Dataset, C: ClusterFn, Y: ClusterAssignment, target: int) -> Callable[[np.ndarray], float]:
    """The function ``eps -> delta(Y, C(X with x_t replaced by x_t + eps))``."""
    if not 0 <= target < X.n:
        raise AttackError(f"target index {target} out of range")
    x_t = X.values[target]

    def f(eps) -> float:
        eps = np.asarray(eps, dtype=float)
        if eps.shape != x_t.shape or not np.all(np.isfinite(eps)):
            raise AttackError("perturbation must be a finite vector of length m")
        return delta_metric(Y, _assignment(C(X.with_row(target, x_t + eps))))

    return f


@dataclass(frozen=True)
class AttackConfig:
    backend: str = "kmeans"
    source_cluster: int = 0
    target_cluster: int = 1
    box: Optional[PerturbationBox] = None
    budget: Optional[OptimBudget] = None
    depth_floor: float = 0.1
    seed: int = 0
    optimizer: str = "cors"

    def __post_init__(self):
        if {self.source_cluster, self.target_cluster} != {0, 1}:
            raise AttackError("source and target clusters must be 0 and 1 in some order")
        if not 0 < self.depth_floor < 1:
            raise AttackError(f"depth floor must be in (0, 1), got {self.depth_floor}")
        if self.optimizer not in ("cors", "anneal"):
            raise AttackError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class AttackReport:
    target_index: int
    target_id: int
    source_cluster: int
    target_cluster: int
    cluster_sizes: tuple
    delta_box: list
    epsilon_star: list
    perturbed_target: list
    delta_value: float
    spillover: list
    reverse_spillover: list
    target_moved: bool
    depth_of_target: float
    depth_of_perturbed: float
    depth_quantile: float
    depth_floor_value: float
    outlier_risk: bool
    eval_trace: list
    labels_before: list = field(repr=False)
    labels_after: list = field(repr=False)

    @property
    def n_spill(self) -> int:
        return len(self.spillover)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["cluster_sizes"] = list(self.cluster_sizes)
        d["n_spill"] = self.n_spill
        del d["labels_before"], d["labels_after"]
        return d

    def assignment_rows(self, sample_ids) -> list:
        return [
            (sid, b, a) for sid, b, a in zip(sample_ids, self.labels_before, self.labels_after)
        ]


def run_attack(X: Dataset, config: AttackConfig, C: Optional[ClusterFn] = None) -> AttackReport:
    """Cluster, pick a target, budget the box, optimise, and audit.

    ``C`` defaults to the configured backend with the configured seed, so
    the clean and perturbed clusterings share their initialisation.
    """
    if C is None:
        C = lambda data: cluster(data, config.backend, config.seed)  # noqa: E731
    model = C(X)
    if not isinstance(model, ClusterModel):
        raise AttackError("the clustering oracle must return a ClusterModel for target selection")
    Y = model.assignment
    k1, k2 = config.source_cluster, config.target_cluster
    t = select_target(X, model, k1)

    stats = ColumnStats.of(X, Y)
    report = DepthReport(stats.comd(X.values))
    floor = report.floor(config.depth_floor)
    box = config.box if config.box is not None else select_delta(X, Y, t, config.depth_floor)
    if box.m != X.m:
        raise AttackError(f"box has {box.m} coordinates, data has {X.m}")
    budget = config.budget or OptimBudget.default(X.m, seed=config.seed)

    f = objective(X, C, Y, t)
    minimize = cors_minimize if config.optimizer == "cors" else anneal_minimize
    result = minimize(f, box, budget)
    eps = result.x

    x_new = X.values[t] + eps
    Yp = align_roles(Y, _assignment(C(X.with_row(t, x_new))))
    before, after = Y.labels, Yp.labels
    others = np.arange(X.n) != t
    spill = np.flatnonzero(others & (before == k1) & (after == k2))
    reverse = np.flatnonzero(others & (before == k2) & (after == k1))
    depth_new = float(stats.comd(x_new)[0])

    return AttackReport(
        target_index=t,
        target_id=X.sample_ids[t],
        source_cluster=k1,
        target_cluster=k2,
        cluster_sizes=Y.cluster_sizes,
        delta_box=box.delta.tolist(),
        epsilon_star=eps.tolist(),
        perturbed_target=x_new.tolist(),
        delta_value=delta_metric(Y, Yp),
        spillover=[X.sample_ids[i] for i in spill],
        reverse_spillover=[X.sample_ids[i] for i in reverse],
        target_moved=bool(after[t] == k2),
        depth_of_target=float(stats.comd(X.values[t])[0]),
        depth_of_perturbed=depth_new,
        depth_quantile=report.quantile_of(depth_new),
        depth_floor_value=floor,
        outlier_risk=depth_new < floor,
        eval_trace=result.values.tolist(),
        labels_before=before.tolist(),
        labels_after=after.tolist(),
    )
