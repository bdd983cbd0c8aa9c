"""Acceptance criteria, one test each, at the stated tolerances and time limits.

Every test records a ``criterion N: PASS|FAIL`` line; the lines are printed
as they happen and again in the terminal summary.
"""

import contextlib
import time

import numpy as np
import pytest

from spillover.attack import AttackConfig, delta_metric, run_attack
from spillover.cli import main, read_config_file
from spillover.clustering import ClusterAssignment, kmeans, ward
from spillover.data import PAIR_GAP, Dataset, close_pair, random_pair, toy_dataset
from spillover.depth import ColumnStats, DepthReport, PerturbationBox, mahalanobis_depth, mdc
from spillover.optimizer import OptimBudget, cors_minimize
from spillover.theory import (
    NoisyMetricConfig,
    noisy_metric,
    theorem1_certify,
    theorem1_validate,
    theorem2_experiment,
    true_metric,
    within_bounds,
)

from conftest import VERDICTS


@pytest.fixture
def criterion(request):
    @contextlib.contextmanager
    def run(number, title, seconds):
        info = {}
        start = time.perf_counter()
        verdict = "FAIL"
        try:
            yield info
            elapsed = time.perf_counter() - start
            info["time"] = f"{elapsed:.1f}s/{seconds}s"
            assert elapsed < seconds, f"took {elapsed:.1f}s, limit {seconds}s"
            verdict = "PASS"
        finally:
            info.setdefault("time", f"{time.perf_counter() - start:.1f}s/{seconds}s")
            detail = ", ".join(f"{k}={v}" for k, v in info.items())
            line = f"criterion {number}: {verdict}  {title} ({detail})"
            print(line)
            request.config.stash[VERDICTS].append(line)

    return run


def _brute(a, b):
    A = ClusterAssignment.from_labels(a).membership.astype(float)
    B = ClusterAssignment.from_labels(b).membership.astype(float)
    return -np.sqrt(((A @ A.T - B @ B.T) ** 2).sum())


def test_criterion_1_delta_oracle(criterion):
    with criterion(1, "delta equals brute-force co-membership norm", 10) as info:
        rng = np.random.default_rng(2024)
        worst = worst_int = 0.0
        done = 0
        while done < 1000:
            n = int(rng.integers(2, 51))
            a, b = rng.integers(0, 2, n), rng.integers(0, 2, n)
            if len(set(a)) < 2 or len(set(b)) < 2:
                continue
            d = delta_metric(ClusterAssignment.from_labels(a), ClusterAssignment.from_labels(b))
            worst = max(worst, abs(d - _brute(a, b)))
            worst_int = max(worst_int, abs(d * d - round(d * d)))
            done += 1
        info.update(pairs=done, max_err=f"{worst:.1e}", max_int_err=f"{worst_int:.1e}")
        assert worst <= 1e-9 and worst_int <= 1e-9


def test_criterion_2_theorem1_identity(criterion):
    with criterion(2, "constructive certificate identity and one-pass replay", 30) as info:
        predicted = missed = bad = 0
        for seed in range(100):
            X = random_pair(seed)
            assert X.n <= 400 and X.m in (2, 5, 10)
            cert = theorem1_certify(X, kmeans(X, seed=seed))
            c1p = cert.shifted_center
            for c in cert.candidates:
                if not c.predicted:
                    continue
                predicted += 1
                y = X.values[c.index]
                gap = ((y - c1p) ** 2).sum() - ((y - cert.c2) ** 2).sum()
                if abs(gap - (c.bound - c.alpha)) > 1e-9 or gap < -1e-9:
                    bad += 1
            missed += len(theorem1_validate(X, cert).one_pass_missed)
        info.update(datasets=100, predicted=predicted, identity_failures=bad, one_pass_missed=missed)
        assert bad == 0 and missed == 0


def test_criterion_3_toy_reproduction(criterion):
    with criterion(3, "toy attack spills with depth kept on >= 8 of 10 seeds", 300) as info:
        good = []
        for seed in range(10):
            rep = run_attack(toy_dataset(seed), AttackConfig(backend="kmeans", depth_floor=0.1, seed=seed))
            if rep.n_spill >= 1 and rep.depth_of_perturbed >= rep.depth_floor_value:
                good.append(seed)
        info.update(successful_seeds=good, count=f"{len(good)}/10")
        assert len(good) >= 8


@pytest.mark.slow
def test_criterion_4_digits(criterion):
    datasets = pytest.importorskip("sklearn.datasets")
    with criterion(4, "digits 1 vs 4, Ward: nonempty spill-over with depth audit passing", 1200) as info:
        digits = datasets.load_digits()
        keep = np.isin(digits.target, (1, 4))
        X = Dataset(digits.data[keep])
        truth = digits.target[keep]
        labels = ward(X).assignment.labels
        # attack from the cluster holding the fours
        source = int(np.mean(truth[labels == 1] == 4) > 0.5)
        budget = OptimBudget(200, 130, 0)
        rep = run_attack(X, AttackConfig(backend="ward", source_cluster=source,
                                         target_cluster=1 - source, budget=budget, seed=0))
        info.update(m=X.m, n=X.n, n_spill=rep.n_spill, target_moved=rep.target_moved,
                    comd_quantile=f"{rep.depth_quantile:.3f}", outlier_risk=rep.outlier_risk)
        assert X.m == 64
        assert rep.n_spill >= 1 and not rep.outlier_risk


def test_criterion_5_optimizer(criterion):
    with criterion(5, "CORS benchmarks with feasibility and budget exactness", 60) as info:
        calls = []

        def counted(f):
            def g(x):
                calls.append(1)
                return f(x)
            return g

        sphere = lambda x: float((x ** 2).sum())  # noqa: E731
        rosen = lambda x: float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)  # noqa: E731
        runs = [
            ("sphere", sphere, PerturbationBox.uniform(1.0, 2), OptimBudget(60, 20, 0), 1e-3),
            ("rosenbrock", rosen, PerturbationBox.uniform(2.0, 2), OptimBudget(200, 20, 0), 1.0),
        ]
        for name, f, box, budget, goal in runs:
            calls.clear()
            res = cors_minimize(counted(f), box, budget)
            info[name] = f"{res.fun:.2e}"
            assert res.fun <= goal
            assert len(calls) == res.nfev == budget.total_evals
            assert all(np.all(np.abs(p) <= box.delta) for p in res.points)
            assert np.all(np.diff(res.incumbent) <= 0)


def test_criterion_6_depth_properties(criterion):
    with criterion(6, "depth properties over 200 random datasets", 30) as info:
        worst_affine = worst_mean = 0.0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            m = int(rng.integers(1, 5))
            values = rng.normal(size=(40, m)) @ rng.normal(size=(m, m)) + rng.normal(size=m)
            A = rng.normal(size=(m, m)) + 2 * np.eye(m)
            b = rng.normal(size=m)
            x = 2 * rng.normal(size=m)
            d0 = mahalanobis_depth(x, values)
            d1 = mahalanobis_depth(A @ x + b, values @ A.T + b)
            worst_affine = max(worst_affine, abs(d1 - d0) / d0)
            worst_mean = max(worst_mean, abs(mahalanobis_depth(values.mean(axis=0), values) - 1))

            labels = np.r_[np.zeros(20, int), np.ones(20, int)]
            values[20:, 0] += 5
            Y = ClusterAssignment.from_labels(labels)
            stats = ColumnStats.of(values, Y)
            c = stats.comd(x)[0]
            for j in range(m):
                parts = [values[labels == k][:, [j]] for k in (0, 1)]
                assert c <= mdc(x[[j]], parts) + 1e-12

            report = DepthReport(stats.comd(values))
            qs = [report.quantile_of(v) for v in np.sort(rng.uniform(0, 2, 25))]
            assert all(q2 >= q1 for q1, q2 in zip(qs, qs[1:]))
        info.update(datasets=200, affine_rel_err=f"{worst_affine:.1e}", mean_err=f"{worst_mean:.1e}")
        assert worst_affine <= 1e-9 and worst_mean <= 1e-12


def test_criterion_7_theorem2(criterion):
    with criterion(7, "noisy-metric bounds, zero-noise persistence, spill inequality", 120) as info:
        for zeta in (0.0, 0.05 * PAIR_GAP, 0.2 * PAIR_GAP):
            spilled = persisted = 0
            for seed in range(50):
                X = close_pair(seed)
                config = NoisyMetricConfig(zeta, seed)
                assert within_bounds(true_metric(X.values), noisy_metric(X, config), zeta)
                rep = theorem2_experiment(X, config)
                assert rep.inequality_holds
                spilled += len(rep.spill_noisy)
                persisted += len(rep.spill_true)
            info[f"zeta={zeta:g}"] = f"{persisted}/{spilled}"
            if zeta == 0:
                assert spilled > 0 and persisted == spilled


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


REPLAYS = [
    ("attack", ["--synth", "toy", "--seed", "4"], "report.json"),
    ("attack", ["--synth", "toy", "--seeds", "0,1", "--budget", "30"], "seed_1/assignments.csv"),
    ("toy", ["--seed", "0"], "toy_c_spillover.svg"),
    ("depth-report", ["--synth", "toy", "--backend", "ward"], "depth.csv"),
    ("verify-theorem1", ["--seeds", "0..19"], "theorem1.json"),
    ("verify-theorem2", ["--seeds", "0..9", "--zeta", "0.125"], "theorem2.json"),
]


def test_criterion_8_reproducibility(criterion, tmp_path):
    with criterion(8, "every CLI command replays byte-for-byte from its embedded config", 600) as info:
        for k, (command, argv, artifact) in enumerate(REPLAYS):
            first = tmp_path / f"run{k}"
            code = main([command, *argv, "--out", str(first)])
            assert code in (0, 2)
            source = first / artifact
            assert read_config_file(source)["command"] == command
            again = tmp_path / f"replay{k}"
            replay_code = main([command, "--config", str(source), "--out", str(again)])
            # a sweep member replays as a single run of that seed
            if source.parent == first:
                assert replay_code == code
            assert _tree(again) == _tree(source.parent)
            info[command] = info.get(command, 0) + 1
