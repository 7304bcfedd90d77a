"""End-to-end tests for the command-line interface."""

import json

import pytest

from dualdose.cli import main


def test_scenarios_list(capsys):
    assert main(["scenarios", "list"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 19
    assert out[0].startswith("A")
    assert any(line.startswith("II-6") for line in out)
    assert any(line.startswith("real-3") for line in out)


def test_simulate_study1_single_replicate(tmp_path, capsys):
    out_json = tmp_path / "report.json"
    out_csv = tmp_path / "report.csv"
    code = main([
        "simulate", "--preset", "study1", "--scenario", "A",
        "--replicates", "1", "--seed", "5", "--chain", "200,50",
        "--out", str(out_json), "--csv", str(out_csv),
    ])
    assert code == 0
    report = json.loads(out_json.read_text())
    assert report["design"]["chain_keep"] == 200
    assert report["scenarios"][0]["name"] == "A"
    assert out_csv.read_text().count("\n") == 2
    assert "rec at" in capsys.readouterr().out


def test_simulate_deterministic_output(tmp_path):
    paths = []
    for tag in ("one", "two"):
        out = tmp_path / f"{tag}.json"
        code = main([
            "simulate", "--preset", "study1", "--scenario", "B",
            "--replicates", "2", "--seed", "11", "--chain", "150,40",
            "--out", str(out),
        ])
        assert code == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_simulate_scenario_file(tmp_path):
    scen = tmp_path / "scen.json"
    scen.write_text(json.dumps({
        "name": "mini", "I": 4, "J": 4, "theta": 0.2,
        "p": [round(0.02 + 0.03 * (i // 4 + i % 4), 2) for i in range(16)],
    }))
    out = tmp_path / "r.json"
    code = main([
        "simulate", "--preset", "study1", "--scenario", str(scen),
        "--replicates", "1", "--chain", "150,40", "--out", str(out),
    ])
    assert code == 0
    assert json.loads(out.read_text())["scenarios"][0]["name"] == "mini"


def test_simulate_unknown_scenario(capsys):
    assert main(["simulate", "--preset", "study1", "--scenario", "Z"]) == 2
    assert "error:" in capsys.readouterr().err


def test_simulate_dims_mismatch(tmp_path, capsys):
    scen = tmp_path / "scen.json"
    scen.write_text(json.dumps(
        {"name": "tiny", "I": 2, "J": 2, "theta": 0.2, "p": [0.1, 0.2, 0.2, 0.3]}
    ))
    code = main([
        "simulate", "--preset", "study1", "--scenario", str(scen),
        "--replicates", "1",
    ])
    assert code == 2
    assert "dims" in capsys.readouterr().err


def test_hyperparam_degenerate_grid(tmp_path, capsys):
    out = tmp_path / "shapes.json"
    code = main([
        "hyperparam", "--dims", "2x2", "--target-min", "0.2",
        "--target-max", "0.6", "--tolerance", "0.45",
        "--points", "1,1,1", "--t-range", "0.3,0.3", "--s-range", "0.3,0.3",
        "--l-factors", "0.3,0.3", "--chain", "400,100", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["dims"] == {"n_rows": 2, "n_cols": 2}
    assert len(doc["alpha"]) == 4 and len(doc["beta"]) == 4
    assert set(doc["template"]) == {"m", "M", "t", "s", "l", "u"}
    assert doc["diagnostics"][0]["confirmed"] is True
    assert "feasible candidates: 1" in capsys.readouterr().out


def test_unknown_preset_rejected():
    with pytest.raises(SystemExit):
        main(["simulate", "--preset", "study9", "--replicates", "1"])
