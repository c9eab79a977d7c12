"""Command-line interface: subcommands, exit codes, file outputs."""

import json
import math

import numpy as np
import pytest

from gkpnet import cli, codes, engine


def run_cli(argv):
    return cli.main(argv)


# ---------------------------------------------------------------------------
# Usage errors


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["frobnicate"])
    assert exc.value.code == 2


def test_no_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_cli([])
    assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["--version"])
    assert exc.value.code == 0


# ---------------------------------------------------------------------------
# verify


def test_verify_ratios(capsys):
    assert run_cli(["verify", "--ratios"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out


def test_verify_splitters_small(capsys):
    assert run_cli(["verify", "--splitters", "--max-n", "6"]) == 0


def test_verify_json_report(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert (
        run_cli(["verify", "--ratios", "--json", str(report)]) == 0
    )
    data = json.loads(report.read_text())
    assert data["pass"]
    ratios = [r["ratio"] for r in data["report"][0]["rows"]]
    assert ratios[0] == pytest.approx(2.01, abs=0.02)


# ---------------------------------------------------------------------------
# inspect


def test_inspect_requires_target(capsys):
    assert run_cli(["inspect"]) == 2


def test_inspect_splitter_angles(capsys):
    assert run_cli(["inspect", "--splitter", "star", "--n", "4"]) == 0
    data = json.loads(capsys.readouterr().out)
    angles = [float(a["theta"]) for a in data["splitter"]["angles"]]
    want = [-math.atan(1.0 / math.sqrt(k)) for k in (1, 2, 3)]
    assert angles == pytest.approx(want, abs=1e-11)
    # 12 significant digits in the serialized form.
    assert data["splitter"]["angles"][0]["theta"] == "-0.785398163397"
    assert data["splitter"]["reduced"]["canonical"] is True
    assert float(data["splitter"]["reduced"]["zeta"]) == pytest.approx(2.0)


def test_inspect_tree_final_angle(capsys):
    assert run_cli(["inspect", "--splitter", "tree", "--n", "7"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["splitter"]["angles"][-1]["theta"] == "-0.713724378945"


def test_inspect_graph_dump(tmp_path, capsys):
    graph_file = tmp_path / "g.json"
    graph_file.write_text(
        json.dumps({"num_nodes": 3, "edges": [[0, 1], [1, 2]]})
    )
    out_file = tmp_path / "dump.json"
    assert (
        run_cli(["inspect", "--graph", str(graph_file), "--out", str(out_file)])
        == 0
    )
    data = json.loads(out_file.read_text())
    assert data["layout"]["num_nodes"] == 3
    assert data["shift_matrix"]["shape"] == [
        2 * data["layout"]["num_modes"],
        2 * data["layout"]["num_modes"],
    ]
    assert data["shift_matrix"]["triplets"]
    assert len(data["plan"]) == data["layout"]["num_modes"]


# ---------------------------------------------------------------------------
# codegen


def test_codegen_roundtrip(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GKPNET_OUTDIR", str(tmp_path))
    assert run_cli(["codegen", "toric", "--d", "3"]) == 0
    path = tmp_path / "toric_d3.code"
    assert path.exists()
    code = codes.load_code(path)
    assert code.n == 18 and code.distance == 3
    code.validate()


def test_codegen_unknown_family(capsys):
    assert run_cli(["codegen", "hexagonal", "--d", "3"]) == 2


def test_codegen_bad_distance(capsys):
    assert run_cli(["codegen", "toric", "--d", "1"]) == 2


# ---------------------------------------------------------------------------
# simulate / sweep


def test_simulate_inline_args(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GKPNET_OUTDIR", str(tmp_path))
    rc = run_cli(
        [
            "simulate",
            "--d", "2",
            "--epsilon", "0.0",
            "--trials", "15",
            "--seed", "1",
            "--threads", "1",
        ]
    )
    assert rc == 0
    data = json.loads(capsys.readouterr().out)
    assert data[0]["failures"] == 0
    assert data[0]["trials"] == 15


def test_simulate_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epsilons": [0.05], "bogus_field": 1}))
    assert run_cli(["simulate", "--config", str(cfg)]) == 2


def test_sweep_missing_config_exits_2(capsys):
    assert run_cli(["sweep", "--config", "/nonexistent/conf.json"]) == 2


def test_sweep_schema_violation_exits_1(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epsilons": [0.05], "splitter": "ring"}))
    assert run_cli(["sweep", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"trials": 10}))  # empty noise grid
    assert run_cli(["sweep", "--config", str(cfg)]) == 1


def test_sweep_writes_default_outputs(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GKPNET_OUTDIR", str(tmp_path))
    cfg = tmp_path / "c.json"
    cfg.write_text(
        json.dumps(
            {
                "distance": 2,
                "epsilons": [0.0],
                "trials": 10,
                "seed": 5,
                "workers": 1,
            }
        )
    )
    assert run_cli(["sweep", "--config", str(cfg)]) == 0
    csv_file = tmp_path / "sweep.csv"
    manifest_file = tmp_path / "sweep_manifest.json"
    assert csv_file.exists() and manifest_file.exists()
    lines = csv_file.read_text().splitlines()
    assert lines[0].split(",") == engine._CSV_COLUMNS
    assert len(lines) == 2
    manifest = json.loads(manifest_file.read_text())
    assert manifest["config"]["trials"] == 10


def test_sweep_flag_overrides_config(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GKPNET_OUTDIR", str(tmp_path))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"distance": 2, "epsilons": [0.0], "trials": 10}))
    out = tmp_path / "named.csv"
    assert (
        run_cli(
            [
                "sweep",
                "--config", str(cfg),
                "--trials", "7",
                "--out-csv", str(out),
            ]
        )
        == 0
    )
    lines = out.read_text().splitlines()
    assert lines[1].split(",")[6] == "7"
