"""Derivative-free minimisation over an axis-aligned box.

``cors_minimize`` is a response-surface method: a cubic RBF interpolant
with a linear tail is refitted to every evaluation, and the next point is
the surrogate minimiser subject to keeping a cycling minimum distance from
everything evaluated so far. ``anneal_minimize`` is plain simulated
annealing, kept as a comparison baseline.

Both optimisers work in the unit cube of the box's non-degenerate
coordinates; zero-width coordinates are pinned at 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .depth import PerturbationBox

log = logging.getLogger(__name__)

DISTANCE_CYCLE = (0.9, 0.75, 0.25, 0.05, 0.03, 0.0)
DUPLICATE_TOL = 1e-12


class OptimizerError(RuntimeError):
    pass


class SingularSystemError(OptimizerError):
    pass


@dataclass(frozen=True)
class OptimBudget:
    total_evals: int
    init_evals: int
    seed: int = 0

    def __post_init__(self):
        if self.init_evals < 1 or self.total_evals <= self.init_evals:
            raise OptimizerError(
                f"need 1 <= init_evals < total_evals, got {self.init_evals}, {self.total_evals}"
            )

    @classmethod
    def default(cls, m: int, seed: int = 0, total_evals: int | None = None) -> "OptimBudget":
        init = max(2 * (m + 1), 20)
        total = total_evals if total_evals is not None else min(30 * m, 3000)
        return cls(max(total, init + 1), init, seed)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    points: np.ndarray
    values: np.ndarray
    betas: list = field(default_factory=list)

    @property
    def nfev(self) -> int:
        return len(self.values)

    @property
    def incumbent(self) -> np.ndarray:
        """Best-so-far value after each evaluation."""
        return np.minimum.accumulate(self.values)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "fun": self.fun,
            "nfev": self.nfev,
            "values": self.values.tolist(),
        }


def _lhs_unit(count: int, d: int, rng: np.random.Generator) -> np.ndarray:
    strata = np.column_stack([rng.permutation(count) for _ in range(d)]) if d else np.zeros((count, 0))
    return (strata + rng.random((count, d))) / count


def latin_hypercube(count: int, box: PerturbationBox, seed: int) -> np.ndarray:
    """``count`` points in the box, one per stratum along every coordinate."""
    if count < 1:
        raise OptimizerError("count must be >= 1")
    u = _lhs_unit(count, box.m, np.random.default_rng(seed))
    return np.clip(box.lower + u * (box.upper - box.lower), box.lower, box.upper)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(a, b)


@dataclass(frozen=True)
class SurrogateModel:
    """Cubic RBF interpolant ``s(x) = sum_i w_i |x - c_i|^3 + a_0 + a . x``."""

    centers: np.ndarray
    weights: np.ndarray
    tail: np.ndarray

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.evaluate(points, _pairwise(points, self.centers))

    def evaluate(self, points: np.ndarray, dist: np.ndarray) -> np.ndarray:
        """Surrogate values given precomputed distances to the centres."""
        return dist ** 3 @ self.weights + self.tail[0] + points @ self.tail[1:]


def fit_cubic_rbf(points, values) -> SurrogateModel:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    f = np.asarray(values, dtype=float)
    n, d = pts.shape
    if f.shape != (n,):
        raise OptimizerError(f"{n} points but {f.size} values")
    if n < d + 1:
        raise SingularSystemError(f"need at least {d + 1} points in {d} dimensions, got {n}")

    dist = _pairwise(pts, pts)
    np.fill_diagonal(dist, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[i, j] <= DUPLICATE_TOL * max(1.0, np.abs(pts).max()):
        raise SingularSystemError(f"points {min(i, j)} and {max(i, j)} coincide")
    np.fill_diagonal(dist, 0.0)

    tail_basis = np.hstack([np.ones((n, 1)), pts])
    if np.linalg.matrix_rank(tail_basis) < d + 1:
        raise SingularSystemError("points are not affinely independent")
    system = np.zeros((n + d + 1, n + d + 1))
    system[:n, :n] = dist ** 3
    system[:n, n:] = tail_basis
    system[n:, :n] = tail_basis.T
    rhs = np.concatenate([f, np.zeros(d + 1)])
    try:
        coef = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"RBF system is singular: {exc}") from None
    return SurrogateModel(pts.copy(), coef[:n], coef[n:])


def _pattern_search(model, starts, min_dist, iters, tol=1e-6):
    """Compass search from many starts at once, inside the unit cube.

    Candidates are ranked lexicographically by (distance-constraint
    violation, surrogate value), so infeasible starts first walk into the
    feasible region. Each poll moves one coordinate, so its squared
    distances to the centres are updated from the current ones instead of
    recomputed. Returns the best point found and its violation.
    """
    centers = model.centers
    n_starts, d = starts.shape
    w = model.weights
    lin = model.tail[1:]

    def exact(pts):
        r2 = cdist(pts, centers, "sqeuclidean")
        r = np.sqrt(r2)
        viol = np.maximum(min_dist - r.min(axis=1), 0.0)
        return r2, viol, r ** 3 @ w + model.tail[0] + pts @ lin

    pos = starts.copy()
    r2, viol, val = exact(pos)
    step = np.full(n_starts, 0.25)
    signs = np.array([1.0, -1.0])
    for _ in range(iters):
        live = np.flatnonzero(step > tol)
        if live.size == 0:
            break
        p = pos[live]
        # actual per-coordinate moves after clipping, shape (L, 2, d)
        moves = np.clip(p[:, None, :] + signs[None, :, None] * step[live, None, None], 0.0, 1.0) - p[:, None, :]
        diff = p[:, :, None] - centers.T[None, :, :]  # (L, d, N)
        cand_r2 = (
            r2[live, None, None, :]
            + 2.0 * moves[:, :, :, None] * diff[:, None, :, :]
            + moves[:, :, :, None] ** 2
        )
        cand_r = np.sqrt(np.maximum(cand_r2, 0.0))
        cv = np.maximum(min_dist - cand_r.min(axis=3), 0.0).reshape(live.size, -1)
        cs = (cand_r ** 3 @ w + model.tail[0] + (p @ lin)[:, None, None] + moves * lin).reshape(live.size, -1)
        least = cv.min(axis=1, keepdims=True)
        best = np.argmin(np.where(cv == least, cs, np.inf), axis=1)
        rows = np.arange(live.size)
        bv, bs = cv[rows, best], cs[rows, best]
        target = np.zeros((live.size, d))
        sgn, coord = np.divmod(best, d)
        target[rows, coord] = moves[rows, sgn, coord]
        better = (bv < viol[live]) | ((bv == viol[live]) & (bs < val[live]))
        better &= target.any(axis=1)

        # pattern move: every coordinate's better-than-current poll at once
        cv3 = cv.reshape(live.size, 2, d)
        cs3 = cs.reshape(live.size, 2, d)
        gain = (cv3 < viol[live, None, None]) | (
            (cv3 == viol[live, None, None]) & (cs3 < val[live, None, None])
        )
        pick = np.where(gain[:, 0] & (~gain[:, 1] | (cs3[:, 0] <= cs3[:, 1])), 0, 1)
        combo = np.where(gain.any(axis=1), np.take_along_axis(moves, pick[:, None, :], 1)[:, 0], 0.0)
        multi = better & ((combo != 0).sum(axis=1) > 1)
        if multi.any():
            cr2, cvv, csv = exact(np.clip(p[multi] + combo[multi], 0.0, 1.0))
            win = (cvv < bv[multi]) | ((cvv == bv[multi]) & (csv < bs[multi]))
            idx = np.flatnonzero(multi)[win]
            target[idx] = np.clip(p[idx] + combo[idx], 0.0, 1.0) - p[idx]

        if better.any():
            moved = live[better]
            pos[moved] = np.clip(pos[moved] + target[better], 0.0, 1.0)
            r2[moved], viol[moved], val[moved] = exact(pos[moved])
        step[live[~better]] *= 0.5
    k = np.lexsort((val, viol))[0]
    return pos[k], viol[k]


def _max_min_distance_bound(evaluated: np.ndarray) -> float:
    """Upper bound on the largest distance any cube point can keep from
    all evaluated points: the smallest farthest-corner distance."""
    far = np.sqrt((np.maximum(evaluated, 1.0 - evaluated) ** 2).sum(axis=1))
    return float(far.min())


def _dedupe(u, evaluated, strata):
    """Move a candidate that coincides with an evaluated point to a nearby
    stratum midpoint that does not."""
    if _pairwise(u[None], evaluated).min() > DUPLICATE_TOL:
        return u
    mid = (np.minimum(np.floor(u * strata), strata - 1) + 0.5) / strata
    for offset in range(strata):
        for sign in (1.0, -1.0):
            c = np.clip(mid + sign * offset / strata, 0.0, 1.0)
            if _pairwise(c[None], evaluated).min() > DUPLICATE_TOL:
                return c
    raise OptimizerError("no unevaluated stratum midpoint left")


class _Problem:
    """Maps the unit cube of active coordinates onto the box and counts calls."""

    def __init__(self, f, box: PerturbationBox):
        self.f = f
        self.box = box
        self.active = np.flatnonzero(box.delta > 0)
        self.points = []
        self.values = []

    @property
    def d(self) -> int:
        return self.active.size

    def to_box(self, u) -> np.ndarray:
        x = np.zeros(self.box.m)
        lo, hi = self.box.lower[self.active], self.box.upper[self.active]
        x[self.active] = np.clip(lo + np.asarray(u) * (hi - lo), lo, hi)
        return x

    def __call__(self, u) -> float:
        x = self.to_box(u)
        v = float(self.f(x))
        if not np.isfinite(v):
            raise OptimizerError(f"objective returned non-finite value {v}")
        self.points.append(x)
        self.values.append(v)
        log.debug("eval %d: f = %.6g", len(self.values), v)
        return v

    def result(self, betas=()) -> OptimResult:
        values = np.array(self.values)
        k = int(np.argmin(values))
        return OptimResult(self.points[k].copy(), float(values[k]), np.array(self.points), values, list(betas))


def cors_minimize(
    f: Callable[[np.ndarray], float],
    box: PerturbationBox,
    budget: OptimBudget,
    n_starts: int = 32,
    search_iters: int = 200,
) -> OptimResult:
    """Minimise ``f`` over ``box`` with exactly ``budget.total_evals`` calls.

    A degenerate box (all widths zero) has a single feasible point, which
    is evaluated once.
    """
    prob = _Problem(f, box)
    if prob.d == 0:
        prob(np.zeros(0))
        return prob.result()
    if budget.init_evals < prob.d + 1:
        raise OptimizerError(
            f"init_evals={budget.init_evals} cannot fit a linear tail in {prob.d} dimensions"
        )
    rng = np.random.default_rng(budget.seed)
    diag = np.sqrt(prob.d)

    us = list(_lhs_unit(budget.init_evals, prob.d, rng))
    fs = [prob(u) for u in us]
    betas = []
    cycle = 0
    while len(fs) < budget.total_evals:
        beta = DISTANCE_CYCLE[cycle % len(DISTANCE_CYCLE)]
        cycle += 1
        U = np.array(us)
        if beta * diag > _max_min_distance_bound(U):
            continue
        model = fit_cubic_rbf(U, fs)
        starts = np.vstack([U[int(np.argmin(fs))], _lhs_unit(n_starts - 1, prob.d, rng)])
        u, viol = _pattern_search(model, starts, beta * diag, search_iters)
        if viol > 0:
            continue
        u = _dedupe(u, U, budget.total_evals)
        us.append(u)
        fs.append(prob(u))
        betas.append(beta)
    return prob.result(betas)


def anneal_minimize(
    f: Callable[[np.ndarray], float],
    box: PerturbationBox,
    budget: OptimBudget,
    final_ratio: float = 1e-3,
) -> OptimResult:
    """Simulated annealing with geometric cooling.

    The first ``init_evals`` calls are a Latin hypercube used to start from
    the best sample and to set the initial temperature to the spread of
    observed values. Proposals are Gaussian, scaled with sqrt(T/T0), and
    clipped to the box.
    """
    prob = _Problem(f, box)
    if prob.d == 0:
        prob(np.zeros(0))
        return prob.result()
    rng = np.random.default_rng(budget.seed)
    init = _lhs_unit(budget.init_evals, prob.d, rng)
    fs = np.array([prob(u) for u in init])
    cur = init[int(np.argmin(fs))].copy()
    fcur = float(fs.min())
    t0 = max(float(fs.std()), 1e-12)
    steps = budget.total_evals - budget.init_evals
    alpha = final_ratio ** (1.0 / steps)
    temp = t0
    for _ in range(steps):
        sigma = max(0.2 * np.sqrt(temp / t0), 1e-4)
        cand = np.clip(cur + sigma * rng.standard_normal(prob.d), 0.0, 1.0)
        fc = prob(cand)
        if fc <= fcur or rng.random() < np.exp(-(fc - fcur) / temp):
            cur, fcur = cand, fc
        temp *= alpha
    return prob.result()
