import json

import numpy as np
import pytest

from cganuc import cli
from cganuc.io import load_model, read_csv, read_predictions

FAST = ["--epochs", "3", "--batch-size", "50", "--hidden", "8", "--u", "4"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "heteroscedastic", "--n", 120, "--seed", 1, "--out", d / "reg.csv") == 0
    assert run("synth", "blobs", "--n", 150, "--seed", 2, "--out", d / "blobs.csv") == 0
    assert run("synth", "prices", "--n", 400, "--seed", 3, "--out", d / "prices.csv") == 0
    assert run("synth", "windows", "--prices", d / "prices.csv", "--out", d / "win.csv") == 0
    assert run("train", "--data", d / "reg.csv", "--model-out", d / "reg.model", *FAST) == 0
    assert run("train", "--data", d / "blobs.csv", "--model-out", d / "cls.model", "--task", "classification",
               *FAST) == 0
    assert run("train", "--data", d / "win.csv", "--model-out", d / "win.model", *FAST) == 0
    return d


def test_train_outputs(workdir):
    assert (workdir / "reg.model").exists()
    kind, cfg, rows = read_csv(workdir / "reg.train.csv")
    assert kind == "train-report" and cfg["epochs"] == 3 and len(rows) == 3
    assert load_model(workdir / "cls.model").task == "classification"


def test_train_echoes_resolved_config(workdir, capsys):
    assert run("train", "--data", workdir / "reg.csv", "--model-out", workdir / "echo.model", *FAST) == 0
    err = capsys.readouterr().err
    line = next(ln for ln in err.splitlines() if ln.startswith("cganuc: resolved config "))
    cfg = json.loads(line[len("cganuc: resolved config "):])
    assert cfg["seed"] == 0 and cfg["epochs"] == 3 and cfg["lr_gen"] == 2e-4


def test_train_deterministic(workdir):
    a, b = workdir / "det_a.model", workdir / "det_b.model"
    assert run("train", "--data", workdir / "reg.csv", "--model-out", a, "--seed", 9, *FAST) == 0
    assert run("train", "--data", workdir / "reg.csv", "--model-out", b, "--seed", 9, *FAST) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".train.csv").read_bytes() == b.with_suffix(".train.csv").read_bytes()


def test_config_file_and_flag_override(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 2, "seed": 4, "hidden": [8], "u": 4}))
    assert run("train", "--config", cfg, "--data", workdir / "reg.csv", "--model-out", tmp_path / "m",
               "--epochs", 1) == 0
    model = load_model(tmp_path / "m")
    assert model.config["epochs"] == 1 and model.config["seed"] == 4


def test_config_file_unknown_key(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochz": 2}))
    assert run("train", "--config", cfg, "--data", workdir / "reg.csv", "--model-out", tmp_path / "m") == 1


def test_missing_dataset_named(tmp_path, capsys):
    code = run("train", "--data", tmp_path / "nowhere.csv", "--model-out", tmp_path / "m")
    assert code == 2
    assert "nowhere.csv" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert run("train", "--model-out", tmp_path / "m") == 1
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1


def test_divergence_exit_code(tmp_path):
    data = tmp_path / "huge.csv"
    data.write_text("# cganuc-dataset v1\n# meta {\"n\":2,\"p\":1,\"q\":1,\"split\":\"train\"}\n# note x\n"
                    "x0,y0\n0.0,1e7\n1.0,1e7\n")
    assert run("train", "--data", data, "--model-out", tmp_path / "m", "--epochs", 1, "--hidden", 3) == 3


def test_predict_records(workdir, tmp_path):
    out = tmp_path / "p.jsonl"
    assert run("predict", "--model", workdir / "reg.model", "--data", workdir / "reg.csv", "--out", out,
               "--k", 32) == 0
    cfg, recs = read_predictions(out)
    assert len(recs) == 120 and cfg["k"] == 32 and cfg["seed"] == 0
    assert "edges" not in recs[0]
    assert run("predict", "--model", workdir / "reg.model", "--data", workdir / "reg.csv", "--out", out,
               "--k", 32, "--emit-distributions") == 0
    _, recs = read_predictions(out)
    assert len(recs[0]["edges"][0]) == 65 and abs(sum(recs[0]["mass"][0]) - 1) < 1e-9


def test_predict_task_mismatch(workdir, tmp_path):
    assert run("predict", "--model", workdir / "reg.model", "--data", workdir / "reg.csv",
               "--out", tmp_path / "p", "--task", "classification") == 2


def test_predict_corrupted_model(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.model"
    text = (workdir / "reg.model").read_text()
    bad.write_text(text.replace("0x1", "0x2", 1))
    assert run("predict", "--model", bad, "--data", workdir / "reg.csv", "--out", tmp_path / "p") == 2
    assert "checksum" in capsys.readouterr().err


def test_eval_regression_and_classification(workdir, tmp_path):
    out = tmp_path / "e.json"
    assert run("eval", "--model", workdir / "reg.model", "--data", workdir / "reg.csv", "--out", out,
               "--k", 16) == 0
    doc = json.loads(out.read_text())
    assert doc["format"] == "cganuc-eval v1" and doc["report"]["n"] == 120
    assert run("eval", "--model", workdir / "cls.model", "--data", workdir / "blobs.csv", "--out", out,
               "--k", 16) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["n_correct"] + rep["n_wrong"] == 150


def test_sweep_rows_and_consistency(workdir, tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--model", workdir / "cls.model", "--data", workdir / "blobs.csv", "--out", out,
               "--a-values", "0,0.5,1.0", "--k", 16) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# cganuc-sweep v1"
    assert lines[2] == "a,accuracy,median_eta"
    _, _, rows = read_csv(out)
    assert [float(r["a"]) for r in rows] == [0.0, 0.5, 1.0]
    preds = tmp_path / "p.jsonl"
    assert run("predict", "--model", workdir / "cls.model", "--data", workdir / "blobs.csv", "--out", preds,
               "--k", 16) == 0
    from cganuc.io import load_dataset
    labels = load_dataset(workdir / "blobs.csv").labels()
    _, recs = read_predictions(preds)
    acc = np.mean([r["class"] == lab for r, lab in zip(recs, labels)])
    assert float(rows[0]["accuracy"]) == acc


def test_sweep_needs_classifier(workdir, tmp_path):
    assert run("sweep", "--model", workdir / "reg.model", "--data", workdir / "reg.csv",
               "--out", tmp_path / "s.csv") == 2


def test_backtest_outputs(workdir, tmp_path):
    out = tmp_path / "bt"
    assert run("backtest", "--prices", workdir / "prices.csv", "--model", workdir / "win.model",
               "--out-dir", out, "--thresholds", "2.0", "--k", 32) == 0
    assert sorted(p.name for p in out.iterdir()) == ["equity_baseline.csv", "equity_threshold_1.csv",
                                                     "summary.csv"]
    _, _, summary = read_csv(out / "summary.csv")
    assert [r["strategy"] for r in summary] == ["baseline", "threshold_1"]
    for row, name in zip(summary, ["baseline", "threshold_1"]):
        _, _, curve = read_csv(out / f"equity_{name}.csv")
        assert float(curve[-1]["cumulative"]) == pytest.approx(float(row["cumulative_return"]), abs=1e-12)
        assert int(row["n_long"]) + int(row["n_short"]) + int(row["n_neutral"]) == len(curve)


def test_backtest_from_predictions_file(workdir, tmp_path):
    test_windows = tmp_path / "test.csv"
    assert run("synth", "windows", "--prices", workdir / "prices.csv", "--split", "test",
               "--out", test_windows) == 0
    preds = tmp_path / "p.jsonl"
    assert run("predict", "--model", workdir / "win.model", "--data", test_windows, "--out", preds,
               "--k", 32) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("backtest", "--prices", workdir / "prices.csv", "--predictions", preds, "--out-dir", a,
               "--k", 32) == 0
    assert run("backtest", "--prices", workdir / "prices.csv", "--model", workdir / "win.model",
               "--out-dir", b, "--k", 32) == 0
    assert (a / "equity_baseline.csv").read_text() == (b / "equity_baseline.csv").read_text()


def test_backtest_missing_prices(workdir, tmp_path, capsys):
    code = run("backtest", "--prices", tmp_path / "gone.csv", "--model", workdir / "win.model",
               "--out-dir", tmp_path / "o")
    assert code == 2
    assert "gone.csv" in capsys.readouterr().err
