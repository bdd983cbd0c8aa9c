"""Executable checks for the two spill-over existence arguments.

The first is constructive for K-Means: move a source-cluster point ``x``
with ``<x - c1, c2 - c1> >= 0`` onto ``c2``; the source centroid then
shifts by ``(x - c1) / (n1 - 1)`` away from ``x`` and any source point
``y`` with ``<x - c1, y - c1> >= 0`` and

    alpha = |y - c2|^2 - |y - c1|^2  <=  |c1 - c1'|^2 + 2 <y - c1, c1 - c1'>

ends up at least as close to ``c2`` as to the shifted centre ``c1'``.

The second concerns an attacker clustering with a noisy metric ``d'``
that stays within ``zeta`` of the true metric ``d``. A spilled point then
satisfies ``d(y, c2) - d(y, c1) > -gamma - 2 zeta`` against the true-metric
centres, with ``gamma`` a sum of three ``d'`` centre displacements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .clustering import ClusterModel, _lloyd, centroids_of
from .data import Dataset


class TheoryError(ValueError):
    pass


@dataclass
class Candidate:
    index: int
    alpha: float
    bound: float
    inner: float

    @property
    def predicted(self) -> bool:
        return self.alpha <= self.bound and self.inner >= 0


@dataclass
class Theorem1Certificate:
    source: int
    target: int
    c1: np.ndarray
    c2: np.ndarray
    n1: int
    center_shift: np.ndarray
    candidates: list

    @property
    def shifted_center(self) -> np.ndarray:
        return self.c1 - self.center_shift

    @property
    def predicted_spill(self) -> list:
        return [c.index for c in self.candidates if c.predicted]

    def check(self, X: Dataset, tol: float = 1e-9) -> list:
        """Indices whose concluding inequality or identity fails."""
        bad = []
        c1p = self.shifted_center
        for c in self.candidates:
            if not c.predicted:
                continue
            y = X.values[c.index]
            gap = ((y - c1p) ** 2).sum() - ((y - self.c2) ** 2).sum()
            scale = max(1.0, abs(c.bound), abs(c.alpha))
            if gap < -tol * scale or abs(gap - (c.bound - c.alpha)) > tol * scale:
                bad.append(c.index)
        return bad

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "c1": self.c1.tolist(),
            "c2": self.c2.tolist(),
            "n1": self.n1,
            "center_shift": self.center_shift.tolist(),
            "shifted_center": self.shifted_center.tolist(),
            "predicted_spill": self.predicted_spill,
            "candidates": [c.__dict__ for c in self.candidates if c.inner >= 0],
        }


def theorem1_certify(X: Dataset, model: ClusterModel, source: int = 0) -> Theorem1Certificate:
    """Build the constructive certificate for ``model``'s source cluster.

    The perturbed point is the source point with the largest projection
    onto ``c2 - c1``.
    """
    values = X.values
    members = model.assignment.members(source)
    if members.size < 2:
        raise TheoryError("the source cluster needs at least two points")
    if model.assignment.members(1 - source).size < 1:
        raise TheoryError("the destination cluster is empty")
    c1 = values[members].mean(axis=0)
    c2 = values[model.assignment.members(1 - source)].mean(axis=0)
    proj = (values[members] - c1) @ (c2 - c1)
    k = int(np.argmax(proj))
    if proj[k] < 0:
        raise TheoryError("no source point makes an acute angle with c2 - c1 (degenerate data)")
    t = int(members[k])
    n1 = members.size
    x = values[t]
    shift = (x - c1) / (n1 - 1)

    cands = []
    for i in members:
        if i == t:
            continue
        y = values[i]
        alpha = ((y - c2) ** 2).sum() - ((y - c1) ** 2).sum()
        bound = (shift ** 2).sum() + 2.0 * (y - c1) @ shift
        cands.append(Candidate(int(i), float(alpha), float(bound), float((x - c1) @ (y - c1))))
    return Theorem1Certificate(source, t, c1, c2, n1, shift, cands)


@dataclass
class Theorem1Validation:
    predicted: list
    one_pass_moved: list
    one_pass_missed: list
    one_pass_extra: list
    lloyd_moved: list
    lloyd_missed: list

    @property
    def holds(self) -> bool:
        return not self.one_pass_missed

    def to_dict(self) -> dict:
        return dict(self.__dict__, holds=self.holds)


def theorem1_validate(X: Dataset, cert: Theorem1Certificate, max_iter: int = 300) -> Theorem1Validation:
    """Replay the certificate on the data.

    The target is moved onto ``c2``; centroids are recomputed from the old
    membership (target now in the destination cluster) and every point is
    reassigned once, ties going to the destination. Lloyd iterations are
    then run to convergence from the same centroids and reported too.
    """
    values = X.values.copy()
    values[cert.target] = cert.c2
    src, dst = cert.source, 1 - cert.source
    was_src = sorted(c.index for c in cert.candidates)
    labels = np.full(X.n, dst)
    labels[was_src] = src
    cents = centroids_of(values, labels)

    d_src = ((values - cents[src]) ** 2).sum(axis=1)
    d_dst = ((values - cents[dst]) ** 2).sum(axis=1)
    one = np.where(d_dst <= d_src, dst, src)
    lloyd, _, _ = _lloyd(values, cents, max_iter)
    if lloyd is None:
        lloyd = one

    predicted = cert.predicted_spill
    moved = [i for i in was_src if one[i] == dst]
    lmoved = [i for i in was_src if lloyd[i] == dst]
    return Theorem1Validation(
        predicted=predicted,
        one_pass_moved=moved,
        one_pass_missed=[i for i in predicted if one[i] != dst],
        one_pass_extra=[i for i in moved if i not in set(predicted)],
        lloyd_moved=lmoved,
        lloyd_missed=[i for i in predicted if lloyd[i] != dst],
    )


@dataclass(frozen=True)
class NoisyMetricConfig:
    zeta: float = 0.0
    noise_seed: int = 0
    true_metric: str = "euclidean"

    def __post_init__(self):
        if not self.zeta >= 0:
            raise TheoryError(f"zeta must be >= 0, got {self.zeta}")
        if self.true_metric != "euclidean":
            raise TheoryError(f"unsupported true metric {self.true_metric!r}")


def true_metric(values: np.ndarray) -> np.ndarray:
    return cdist(values, values)


def noisy_metric(X: Dataset, config: NoisyMetricConfig) -> np.ndarray:
    """Symmetric table ``d'`` with ``max(0, d - zeta) <= d' <= d + zeta``."""
    d = true_metric(X.values)
    n = d.shape[0]
    rng = np.random.default_rng(config.noise_seed)
    eta = np.zeros_like(d)
    iu = np.triu_indices(n, 1)
    eta[iu] = rng.uniform(-config.zeta, config.zeta, size=iu[0].size)
    eta = eta + eta.T
    dp = np.clip(d + eta, np.maximum(0.0, d - config.zeta), d + config.zeta)
    np.fill_diagonal(dp, 0.0)
    return dp


def within_bounds(d: np.ndarray, dp: np.ndarray, zeta: float) -> bool:
    return bool(
        (dp >= np.maximum(0.0, d - zeta)).all()
        and (dp <= d + zeta).all()
        and np.array_equal(dp, dp.T)
        and (np.diag(dp) == 0).all()
    )


def kmedoids2(dist: np.ndarray, max_iter: int = 100) -> tuple:
    """Two medoids for a distance table: greedy BUILD, then alternate.

    Returns ``(labels, medoids)`` with ``medoids[k]`` the row index of
    cluster ``k``'s medoid. Ties go to the lower index throughout.
    """
    n = dist.shape[0]
    if n < 2:
        raise TheoryError("need at least two points")
    first = int(np.argmin(dist.sum(axis=1)))
    gain = np.minimum(dist, dist[first][None, :]).sum(axis=1)
    gain[first] = np.inf
    medoids = np.array([first, int(np.argmin(gain))])
    labels = None
    for _ in range(max_iter):
        new = np.argmin(dist[:, medoids], axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in (0, 1):
            idx = np.flatnonzero(labels == k)
            if idx.size == 0:
                raise TheoryError("empty cluster in 2-medoid clustering")
            medoids[k] = idx[np.argmin(dist[np.ix_(idx, idx)].sum(axis=1))]
    labels = np.argmin(dist[:, medoids], axis=1)
    if np.bincount(labels, minlength=2).min() == 0:
        raise TheoryError("degenerate 2-medoid clustering")
    return labels, medoids


def _align(ref: np.ndarray, labels: np.ndarray, medoids: np.ndarray):
    agree = (ref == labels).sum()
    if agree >= ref.size - agree:
        return labels, medoids
    return 1 - labels, medoids[::-1].copy()


@dataclass
class SpillCheck:
    index: int
    spilled_under_true: bool
    was_source_under_true: bool
    lhs: float
    bound: float

    @property
    def inequality_holds(self) -> bool:
        return self.lhs > self.bound


@dataclass
class Theorem2Report:
    zeta: float
    noise_seed: int
    source: int
    perturbed: int
    moved_onto: int
    medoids_noisy_before: list
    medoids_noisy_after: list
    medoids_true_after: list
    gamma: float
    spill_noisy: list
    spill_true: list
    checks: list = field(default_factory=list)

    @property
    def persistence(self):
        """Fraction of noisy-metric spills that also spill under the true metric."""
        if not self.spill_noisy:
            return None
        return len(self.spill_true) / len(self.spill_noisy)

    @property
    def inequality_holds(self) -> bool:
        return all(c.inequality_holds for c in self.checks)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "checks"}
        d["checks"] = [dict(c.__dict__, inequality_holds=c.inequality_holds) for c in self.checks]
        d["persistence"] = self.persistence
        d["inequality_holds"] = self.inequality_holds
        return d


def theorem2_experiment(X: Dataset, config: NoisyMetricConfig, source: int = 0) -> Theorem2Report:
    """Attack under ``d'`` with the constructive move, then re-check under ``d``.

    Clustering under either metric is 2-medoids, so every centre is a
    data row and ``d'`` between centres is a table lookup. The attacker
    moves the source point nearest (under ``d'``) to the destination
    medoid onto that medoid.
    """
    dp = noisy_metric(X, config)
    lab_p, med_p = kmedoids2(dp)
    src, dst = source, 1 - source
    k1 = np.flatnonzero(lab_p == src)
    x = int(k1[np.argmin(dp[k1, med_p[dst]])])
    onto = int(med_p[dst])

    # x now sits on the destination medoid: copy its d' row, as the noise
    # bounds are then inherited from d(x', .) = d(onto, .)
    dp_after = dp.copy()
    dp_after[x, :] = dp[onto, :]
    dp_after[:, x] = dp[:, onto]
    dp_after[x, x] = dp_after[x, onto] = dp_after[onto, x] = 0.0
    lab_pa, med_pa = _align(lab_p, *kmedoids2(dp_after))

    values = X.values.copy()
    values[x] = X.values[onto]
    d_before = true_metric(X.values)
    d_after = true_metric(values)
    lab_t, _ = _align(lab_p, *kmedoids2(d_before))
    lab_ta, med_ta = _align(lab_t, *kmedoids2(d_after))

    others = np.arange(X.n) != x
    spill_p = np.flatnonzero(others & (lab_p == src) & (lab_pa == dst))
    gamma = (
        dp_after[med_pa[src], med_p[src]]
        + dp_after[med_pa[src], med_ta[src]]
        + dp_after[med_ta[dst], med_p[dst]]
    )
    checks = []
    for y in spill_p:
        checks.append(
            SpillCheck(
                index=int(y),
                spilled_under_true=bool(lab_t[y] == src and lab_ta[y] == dst),
                was_source_under_true=bool(lab_t[y] == src),
                lhs=float(d_after[y, med_ta[dst]] - d_after[y, med_ta[src]]),
                bound=float(-gamma - 2.0 * config.zeta),
            )
        )
    return Theorem2Report(
        zeta=config.zeta,
        noise_seed=config.noise_seed,
        source=src,
        perturbed=x,
        moved_onto=onto,
        medoids_noisy_before=med_p.tolist(),
        medoids_noisy_after=med_pa.tolist(),
        medoids_true_after=med_ta.tolist(),
        gamma=float(gamma),
        spill_noisy=[int(y) for y in spill_p],
        spill_true=[c.index for c in checks if c.spilled_under_true],
        checks=checks,
    )
