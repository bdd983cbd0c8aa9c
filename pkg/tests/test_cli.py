import csv
import json

import pytest

from spillover.cli import EXIT_ERROR, EXIT_NO_SPILL, EXIT_SPILL, main, parse_seeds, read_config_file


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_parse_seeds():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("5,2") == [5, 2]
    assert parse_seeds("7") == [7]


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    code = main(["toy", "--seed", "0", "--out", str(out)])
    return code, out


def test_toy_outputs(toy_run):
    code, out = toy_run
    assert code == EXIT_SPILL
    names = set(_files(out))
    assert {"report.json", "assignments.csv"} <= names
    assert {n for n in names if n.endswith(".svg")} == {
        "toy_a_clusters.svg",
        "toy_b_perturbed.svg",
        "toy_c_spillover.svg",
        "toy_d_comd.svg",
    }
    report = json.loads((out / "report.json").read_text())
    assert report["target_alignment"] >= 0
    assert report["n_spill"] >= 1
    assert report["config"]["seed"] == 0


def test_toy_replay_bit_identical(toy_run, tmp_path):
    _, out = toy_run
    again = tmp_path / "again"
    assert main(["toy", "--seed", "0", "--out", str(again)]) == EXIT_SPILL
    assert _files(again) == _files(out)


@pytest.mark.parametrize("artifact", ["report.json", "assignments.csv", "toy_b_perturbed.svg"])
def test_replay_from_embedded_config(toy_run, tmp_path, artifact):
    _, out = toy_run
    cfg = read_config_file(out / artifact)
    assert cfg["command"] == "toy" and cfg["seed"] == 0
    replay = tmp_path / "replay"
    assert main(["toy", "--config", str(out / artifact), "--out", str(replay)]) == EXIT_SPILL
    assert _files(replay) == _files(out)


def test_attack_zero_delta(tmp_path):
    assert main(["attack", "--synth", "toy", "--delta", "0", "--out", str(tmp_path)]) == EXIT_NO_SPILL
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["spillover"] == [] and report["delta_value"] == 0


def test_attack_csv_input(tmp_path):
    from spillover.data import save_csv, toy_dataset

    data = tmp_path / "toy.csv"
    save_csv(toy_dataset(0), data)
    out = tmp_path / "out"
    code = main(["attack", "--data", str(data), "--header", "--seed", "0", "--out", str(out)])
    assert code == EXIT_SPILL
    assert (out / "clusters.svg").exists()
    rows = list(csv.reader(l for l in (out / "assignments.csv").read_text().splitlines() if not l.startswith("#")))
    assert len(rows) == 201


@pytest.mark.parametrize(
    "argv",
    [
        ["attack", "--data", "/nonexistent/x.csv"],
        ["attack", "--synth", "toy", "--backend", "dbscan"],
        ["attack", "--synth", "nosuch"],
        ["attack", "--synth", "toy", "--delta", "1,2,3"],
    ],
)
def test_error_exit(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsynth = toy\ndelta = 0\nseed = 3\n")
    out = tmp_path / "out"
    assert main(["attack", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == EXIT_NO_SPILL
    embedded = json.loads((out / "report.json").read_text())["config"]
    assert embedded["seed"] == 4 and embedded["delta"] == "0"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert main(["attack", "--config", str(bad), "--out", str(out)]) == EXIT_ERROR


def test_depth_report_schema(tmp_path):
    assert main(["depth-report", "--synth", "toy", "--out", str(tmp_path)]) == EXIT_SPILL
    lines = [l for l in (tmp_path / "depth.csv").read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(lines))
    assert len(rows) == 200
    assert list(rows[0]) == ["sample_id", "cluster", "comd", "quantile"]
    assert all(0 <= float(r["quantile"]) <= 1 for r in rows)


def test_verify_theorem1_sweep(tmp_path):
    assert main(["verify-theorem1", "--seeds", "0..99", "--out", str(tmp_path)]) == EXIT_SPILL
    doc = json.loads((tmp_path / "theorem1.json").read_text())
    assert doc["pass"] and len(doc["runs"]) == 100


def test_verify_theorem2_zero_noise(tmp_path):
    assert main(["verify-theorem2", "--seeds", "0..49", "--zeta", "0", "--out", str(tmp_path)]) == EXIT_SPILL
    doc = json.loads((tmp_path / "theorem2.json").read_text())
    assert doc["persistence"] == 1.0


def test_seed_sweep_layout(tmp_path):
    code = main(["attack", "--synth", "toy", "--seeds", "0,1", "--budget", "25", "--out", str(tmp_path)])
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert sorted(summary["n_spill"]) == ["0", "1"]
    # the sweep exits 0 only when every seed spilled
    assert code == (EXIT_SPILL if all(summary["n_spill"].values()) else EXIT_NO_SPILL)
    assert (tmp_path / "seed_0" / "report.json").exists()
    assert (tmp_path / "seed_1" / "report.json").exists()
