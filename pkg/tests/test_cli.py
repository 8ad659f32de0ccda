from __future__ import annotations

import io
import json

import pytest

from ransomlens.cli import main, read_features, read_manifest
from ransomlens.redteam import RedTeamConfig


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["redteam", "generate", "--out", str(root / "corpus"), "--n-ransomware", "6", "--n-benign", "6",
                 "--seed", "3"]) == 0
    assert main(["augment", "--manifest", str(root / "corpus" / "manifest.json"), "--out", str(root / "aug"),
                 "--periods", "1", "10", "160", "--windows", "250"]) == 0
    for mode in ("ngram", "sequence"):
        assert main(["featurize", "--index", str(root / "aug" / "index.json"), "--out",
                     str(root / f"{mode}.csv"), "--mode", mode]) == 0
    assert main(["train", "--features", str(root / "ngram.csv"), "--out", str(root / "linear.json"),
                 "--epochs", "5"]) == 0
    assert main(["train", "--features", str(root / "sequence.csv"), "--out", str(root / "lstm.json"),
                 "--epochs", "2"]) == 0
    return root


def test_generate_and_augment_artifacts(workdir):
    logs = read_manifest(workdir / "corpus" / "manifest.json")
    assert len(logs) == 12 and sum(lg.label.is_positive for lg in logs) == 6
    index = json.loads((workdir / "aug" / "index.json").read_text())
    assert index["schema_version"] == 1 and index["logs"]
    assert {"path", "label", "method", "params", "origin"} <= set(index["logs"][0])


def test_feature_files(workdir):
    data, meta = read_features(workdir / "ngram.csv")
    assert meta["mode"] == "ngram" and all(len(x) == 90 for x, _, _ in data)
    assert any(key == (160, 250) for _, _, key in data)
    seq_data, seq_meta = read_features(workdir / "sequence.csv")
    assert seq_meta["alphabet"]["size"] == 9 and len(seq_data) == len(data)


def test_evaluate_writes_json(workdir, capsys):
    out = workdir / "eval.json"
    assert main(["evaluate", "--model", str(workdir / "linear.json"), "--features", str(workdir / "ngram.csv"),
                 "--json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert set(report["confusion"]) == {"tp", "fp", "tn", "fn"}
    assert "accuracy" in capsys.readouterr().out


def test_detect_replay_and_live(workdir, capsys, monkeypatch):
    manifest = json.loads((workdir / "corpus" / "manifest.json").read_text())
    rw = next(e for e in manifest["logs"] if e["label"] == "Ransomware")
    log_path = workdir / "corpus" / rw["path"]
    code = main(["detect", "--model", str(workdir / "linear.json"), "--log", str(log_path),
                 "--window", "250", "--stride", "50", "--threshold", "0.0"])
    lines = capsys.readouterr().out.splitlines()
    assert code == 2 and len(lines) == 1 and json.loads(lines[0])["score"] >= 0.0

    monkeypatch.setattr("sys.stdin", io.StringIO(log_path.read_text()))
    code = main(["detect", "--model", str(workdir / "linear.json"), "--window", "250", "--threshold", "1.01"])
    assert code == 0 and capsys.readouterr().out == ""


def test_explain(workdir):
    manifest = json.loads((workdir / "corpus" / "manifest.json").read_text())
    log_path = workdir / "corpus" / manifest["logs"][0]["path"]
    out = workdir / "explain.csv"
    assert main(["explain", "--model", str(workdir / "lstm.json"), "--log", str(log_path), "--out", str(out),
                 "--tsv", str(workdir / "explain.tsv"), "--max-events", "200", "--steps", "10"]) == 0
    rows = out.read_text().splitlines()
    assert rows[0].startswith("index,timestamp_ms,event") and 1 < len(rows) <= 201
    summary = json.loads((workdir / "explain.summary.json").read_text())
    assert summary["steps"] == 10
    assert main(["explain", "--model", str(workdir / "linear.json"), "--log", str(log_path),
                 "--out", str(out)]) == 1


def test_attack_and_harden(workdir):
    grid = workdir / "grid.json"
    grid.write_text(json.dumps([RedTeamConfig(seed=1, victim_count=10).to_json(),
                                RedTeamConfig(seed=2, victim_count=10, pad_low_entropy_fraction=1.0).to_json()]))
    out = workdir / "attack.json"
    assert main(["redteam", "attack", "--model", str(workdir / "linear.json"), "--grid", str(grid),
                 "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert len(payload["outcomes"]) == 2 and 0.0 <= payload["evasion_rate"] <= 1.0

    out = workdir / "harden.json"
    assert main(["redteam", "harden", "--model", str(workdir / "linear.json"), "--grid", str(grid),
                 "--heldout-grid", str(grid), "--manifest", str(workdir / "corpus" / "manifest.json"),
                 "--rounds", "1", "--epochs", "3", "--out", str(out), "--out-model",
                 str(workdir / "hardened.json")]) == 0
    result = json.loads(out.read_text())
    assert len(result["evasion_rates"]) == 1 and (workdir / "hardened.json").exists()


def test_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "manifest.json"
    bad.write_text(json.dumps({"schema_version": 7, "logs": []}))
    assert main(["augment", "--manifest", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "schema_version" in capsys.readouterr().err
    assert main(["evaluate", "--model", str(tmp_path / "missing.json"), "--features", str(bad)]) == 1
    with pytest.raises(SystemExit):
        main(["detect"])


def test_pipeline_smoke(tmp_path):
    out = tmp_path / "run"
    assert main(["pipeline", "--out", str(out), "--n-ransomware", "8", "--n-benign", "8", "--lstm-epochs", "1",
                 "--rounds", "1"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert {"linear", "lstm", "linear_naive", "lstm_naive", "hardened"} <= set(report["evaluations"])
    assert len(report["hardening"]["evasion_rates"]) == 1
    assert (out / "figures" / "evasion_rounds.png").exists()
    assert (out / "models" / "lstm.json").exists()
