"""Command-line entry point.

Every artifact carries the effective configuration (minus the output
directory) as a single JSON line, and ``--config`` accepts either a flat
``key=value`` file or any artifact written by a previous run, so runs can
be replayed exactly.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attack import AttackConfig, AttackError, run_attack
from .clustering import BACKENDS, ClusterAssignment, ClusteringError, cluster, kmeans
from .data import DataError, Dataset, load_csv, synth_named
from .depth import (
    ColumnStats,
    DepthError,
    DepthReport,
    PerturbationBox,
    mahalanobis_depths,
)
from .optimizer import OptimBudget, OptimizerError
from .svg import Layer, scatter_svg
from .theory import (
    NoisyMetricConfig,
    TheoryError,
    noisy_metric,
    theorem1_certify,
    theorem1_validate,
    theorem2_experiment,
    true_metric,
    within_bounds,
)

log = logging.getLogger("spillover")

EXIT_SPILL, EXIT_ERROR, EXIT_NO_SPILL, EXIT_INVARIANT = 0, 1, 2, 3
MARK = "config: "

# key -> (parser, default); flag values override config-file values
OPTIONS = {
    "data": (str, None),
    "header": (lambda v: str(v).lower() in ("1", "true", "yes"), False),
    "synth": (str, None),
    "backend": (str, "kmeans"),
    "seed": (int, 0),
    "seeds": (str, None),
    "delta": (str, "auto"),
    "depth_floor": (float, 0.1),
    "budget": (int, None),
    "source": (int, 0),
    "optimizer": (str, "cors"),
    "zeta": (float, 0.0),
    "project": (str, None),
}

DEFAULT_SYNTH = {"verify-theorem1": "random", "verify-theorem2": "pair", "toy": "toy"}


class ConfigError(ValueError):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"3"``, ``"0..9"`` (inclusive) or ``"1,4,7"``."""
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def read_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        if MARK in line:
            blob = line[line.index(MARK) + len(MARK):].strip()
            blob = blob.removesuffix("-->").strip()
            return json.loads(blob)
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if "config" in doc:
            return doc["config"]
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def effective_config(command: str, args: argparse.Namespace) -> dict:
    from_file = read_config_file(args.config) if args.config else {}
    unknown = set(from_file) - set(OPTIONS) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = {"command": command}
    for key, (conv, default) in OPTIONS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
        elif key in from_file and from_file[key] is not None:
            cfg[key] = conv(from_file[key])
        else:
            cfg[key] = default
    if cfg["data"] is None and cfg["synth"] is None:
        cfg["synth"] = DEFAULT_SYNTH.get(command)
    if cfg["backend"] not in BACKENDS:
        raise ConfigError(f"unknown backend {cfg['backend']!r}; choose from {BACKENDS}")
    return cfg


def load_data(cfg: dict, seed: int) -> Dataset:
    if cfg["data"]:
        return load_csv(cfg["data"], has_header=cfg["header"])
    if cfg["synth"]:
        return synth_named(cfg["synth"], seed)
    raise ConfigError("give --data <csv> or --synth <name>")


def seed_list(cfg: dict) -> list[int]:
    return parse_seeds(cfg["seeds"]) if cfg["seeds"] else [cfg["seed"]]


def parse_delta(text: str, m: int):
    if text == "auto":
        return None
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        return PerturbationBox.uniform(parts[0], m)
    if len(parts) != m:
        raise ConfigError(f"--delta has {len(parts)} entries for {m} features")
    return PerturbationBox(np.array(parts))


def projection(cfg: dict, m: int):
    if cfg["project"]:
        cols = [int(c) for c in cfg["project"].split(",")]
        if len(cols) != 2 or not all(0 <= c < m for c in cols):
            raise ConfigError(f"--project needs two column indices below {m}")
        return cols
    return [0, 1] if m == 2 else None


def _provenance(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True)


def write_json(path: Path, doc: dict, cfg: dict) -> None:
    doc = dict(doc, config=cfg)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list, rows, cfg: dict) -> None:
    lines = [f"# {MARK}{_provenance(cfg)}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_svg(path: Path, svg: str, cfg: dict) -> None:
    head, rest = svg.split("\n", 1)
    path.write_text(f"{head}\n<!-- {MARK}{_provenance(cfg)} -->\n{rest}", encoding="utf-8")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _out_dir(args, seed: int, many: bool) -> Path:
    out = Path(args.out)
    if many:
        out = out / f"seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _attack_one(cfg: dict, seed: int) -> tuple:
    X = load_data(cfg, seed)
    box = parse_delta(cfg["delta"], X.m)
    budget = OptimBudget.default(X.m, seed=seed, total_evals=cfg["budget"])
    config = AttackConfig(
        backend=cfg["backend"],
        source_cluster=cfg["source"],
        target_cluster=1 - cfg["source"],
        box=box,
        budget=budget,
        depth_floor=cfg["depth_floor"],
        seed=seed,
        optimizer=cfg["optimizer"],
    )
    return X, run_attack(X, config)


def _rows(X: Dataset, ids) -> list[int]:
    where = {sid: i for i, sid in enumerate(X.sample_ids)}
    return [where[i] for i in ids]


def _scatter_layers(values, report, cols, after: bool, spill_rows=()):
    labels = np.array(report.labels_after if after else report.labels_before)
    pts = values[:, cols]
    t = report.target_index
    keep = np.arange(len(values)) != t
    layers = [
        Layer(pts[keep & (labels == 0)], "#d62728", label="cluster 0"),
        Layer(pts[keep & (labels == 1)], "#2ca02c", label="cluster 1"),
        Layer(pts[[t]], "#1f77b4", "square", "target", 5),
    ]
    if after:
        layers.append(Layer(np.atleast_2d(np.array(report.perturbed_target))[:, cols], "#000000", "cross", "perturbed", 6))
        spill = list(spill_rows)
        layers.append(Layer(values[spill][:, cols] if spill else np.zeros((0, 2)), "#ff7f0e", "ring", "spill-over", 6))
    return layers


def cmd_attack(args) -> int:
    cfg = effective_config("attack", args)
    seeds = seed_list(cfg)
    many = len(seeds) > 1
    summary = {}
    for seed in seeds:
        X, report = _attack_one(cfg, seed)
        out = _out_dir(args, seed, many)
        run_cfg = dict(cfg, seed=seed, seeds=None)
        write_json(out / "report.json", report.to_dict(), run_cfg)
        rows = report.assignment_rows(X.sample_ids)
        write_csv(out / "assignments.csv", ["sample_id", "cluster_before", "cluster_after"], rows, run_cfg)
        cols = projection(cfg, X.m)
        if cols is not None:
            values = X.values.copy()
            layers = _scatter_layers(values, report, cols, True, _rows(X, report.spillover))
            svg = scatter_svg(layers, f"attack, seed {seed}")
            write_svg(out / "clusters.svg", svg, run_cfg)
        log.info("seed %d: %d spill-over sample(s), delta = %.4f", seed, report.n_spill, report.delta_value)
        summary[seed] = report.n_spill
    if many:
        write_json(Path(args.out) / "summary.json", {"n_spill": {str(k): v for k, v in summary.items()}}, cfg)
    return EXIT_SPILL if all(v > 0 for v in summary.values()) else EXIT_NO_SPILL


def cmd_toy(args) -> int:
    cfg = effective_config("toy", args)
    seeds = seed_list(cfg)
    many = len(seeds) > 1
    spilled = []
    for seed in seeds:
        X, report = _attack_one(cfg, seed)
        out = _out_dir(args, seed, many)
        run_cfg = dict(cfg, seed=seed, seeds=None)
        values = X.values
        Y = np.array(report.labels_before)
        k1, k2 = report.source_cluster, report.target_cluster
        c1 = values[Y == k1].mean(axis=0)
        c2 = values[Y == k2].mean(axis=0)
        xt = values[report.target_index]
        doc = report.to_dict()
        doc["target_alignment"] = float((xt - c1) @ (c2 - c1))
        spill_rows = _rows(X, report.spillover)
        doc["spill_alignment"] = {
            str(sid): float((xt - c1) @ (values[i] - c1)) for sid, i in zip(report.spillover, spill_rows)
        }
        write_json(out / "report.json", doc, run_cfg)
        write_csv(
            out / "assignments.csv",
            ["sample_id", "cluster_before", "cluster_after"],
            report.assignment_rows(X.sample_ids),
            run_cfg,
        )

        cols = projection(cfg, X.m) or [0, 1]
        blocks = [values[Y == k][:, cols] for k in (0, 1)]
        stats = ColumnStats.of(values[:, cols], ClusterAssignment.from_labels(Y))

        def mdc_field(p):
            return sum(mahalanobis_depths(p, b) for b in blocks)

        after = _scatter_layers(values, report, cols, True, spill_rows)
        panels = [
            ("toy_a_clusters.svg", "clusters and target", _scatter_layers(values, report, cols, False), mdc_field),
            ("toy_b_perturbed.svg", "after perturbation", after[:4], mdc_field),
            ("toy_c_spillover.svg", "spill-over highlighted", after, mdc_field),
            ("toy_d_comd.svg", "coordinate-wise min depth", after, stats.comd),
        ]
        for name, title, layers, field in panels:
            write_svg(out / name, scatter_svg(layers, title, field=field), run_cfg)
        spilled.append(report.n_spill > 0)
    return EXIT_SPILL if all(spilled) else EXIT_NO_SPILL


def cmd_depth_report(args) -> int:
    cfg = effective_config("depth-report", args)
    X = load_data(cfg, cfg["seed"])
    model = cluster(X, cfg["backend"], cfg["seed"])
    report = DepthReport(ColumnStats.of(X, model.assignment).comd(X.values))
    rows = [
        (sid, lab, d, report.quantile_of(d))
        for sid, lab, d in zip(X.sample_ids, model.assignment.labels, report.per_sample_comd)
    ]
    out = _out_dir(args, cfg["seed"], False)
    write_csv(out / "depth.csv", ["sample_id", "cluster", "comd", "quantile"], rows, cfg)
    return EXIT_SPILL


def cmd_verify_theorem1(args) -> int:
    cfg = effective_config("verify-theorem1", args)
    runs = []
    ok = True
    for seed in seed_list(cfg):
        X = load_data(cfg, seed)
        model = kmeans(X, seed=seed)
        cert = theorem1_certify(X, model, cfg["source"])
        val = theorem1_validate(X, cert)
        bad = cert.check(X)
        passed = not bad and val.holds
        ok &= passed
        runs.append(
            {
                "seed": seed,
                "certificate": cert.to_dict(),
                "validation": val.to_dict(),
                "identity_failures": bad,
                "pass": passed,
            }
        )
    out = _out_dir(args, cfg["seed"], False)
    write_json(out / "theorem1.json", {"runs": runs, "pass": ok}, cfg)
    return EXIT_SPILL if ok else EXIT_INVARIANT


def cmd_verify_theorem2(args) -> int:
    cfg = effective_config("verify-theorem2", args)
    runs = []
    ok = True
    spilled = persisted = 0
    for seed in seed_list(cfg):
        X = load_data(cfg, seed)
        mc = NoisyMetricConfig(zeta=cfg["zeta"], noise_seed=seed)
        bounds = within_bounds(true_metric(X.values), noisy_metric(X, mc), mc.zeta)
        rep = theorem2_experiment(X, mc, cfg["source"])
        passed = bounds and rep.inequality_holds
        if mc.zeta == 0 and rep.spill_noisy:
            passed &= rep.persistence == 1.0
        ok &= passed
        spilled += len(rep.spill_noisy)
        persisted += len(rep.spill_true)
        runs.append(dict(rep.to_dict(), seed=seed, bounds_hold=bounds, **{"pass": passed}))
    out = _out_dir(args, cfg["seed"], False)
    doc = {
        "runs": runs,
        "pass": ok,
        "spilled_noisy": spilled,
        "spilled_true": persisted,
        "persistence": persisted / spilled if spilled else None,
    }
    write_json(out / "theorem2.json", doc, cfg)
    return EXIT_SPILL if ok else EXIT_INVARIANT


COMMANDS = {
    "attack": cmd_attack,
    "toy": cmd_toy,
    "depth-report": cmd_depth_report,
    "verify-theorem1": cmd_verify_theorem1,
    "verify-theorem2": cmd_verify_theorem2,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spillover", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file or an artifact from an earlier run")
        p.add_argument("--data", help="CSV file of numeric features")
        p.add_argument("--header", action="store_const", const=True, help="CSV has a header row")
        p.add_argument("--synth", help="synthetic dataset: toy, random or pair")
        p.add_argument("--backend", help="kmeans or ward")
        p.add_argument("--seed", type=int)
        p.add_argument("--seeds", help="seed sweep, e.g. 0..9 or 1,3,5")
        p.add_argument("--delta", help='"auto", a scalar, or one value per feature')
        p.add_argument("--depth-floor", dest="depth_floor", type=float)
        p.add_argument("--budget", type=int, help="total objective evaluations")
        p.add_argument("--source", type=int, choices=(0, 1), help="cluster to spill from")
        p.add_argument("--optimizer", choices=("cors", "anneal"))
        p.add_argument("--zeta", type=float, help="metric noise level (verify-theorem2)")
        p.add_argument("--project", help="two feature columns to plot, e.g. 0,3")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (
        ConfigError,
        DataError,
        ClusteringError,
        DepthError,
        AttackError,
        OptimizerError,
        TheoryError,
        OSError,
        ValueError,
    ) as exc:
        print(f"spillover {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
