import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cycletime.ann import NetworkModel
from cycletime.cli import _cell, _parse_seeds, main
from cycletime.dataset import load_csv


def run(argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["gen-data", "--n", "120", "--seed", "7", "--out-dir", str(d), "-o", "data.csv"]) == 0
    return d / "data.csv"


def test_gen_data_writes_requested_rows(tmp_path):
    assert run(["gen-data", "--n", 600, "--seed", 7, "--noise", 0.1, "--out-dir", tmp_path,
                "-o", "data.csv"]) == 0
    body = rows(tmp_path / "data.csv")
    assert body[0] == ["mould_temp", "injection_pressure", "switchover_pressure", "cycle_time"]
    assert len(body) == 601


def test_gen_data_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        run(["gen-data", "--seed", 3, "--out-dir", tmp_path, "-o", name])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_gen_data_rejects_tiny_n(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--n", "5", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2
    assert not any(tmp_path.iterdir())


def test_gen_data_refuses_paths_outside_out_dir(tmp_path):
    inner = tmp_path / "inner"
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--out-dir", str(inner), "-o", "../escape.csv"])
    assert exc.value.code == 2
    assert not (tmp_path / "escape.csv").exists()


def test_train_ann_writes_four_files(tmp_path, data_csv):
    out = tmp_path / "run"
    assert run(["train-ann", "--algo", "br", "--hidden", "8,8", "--data", data_csv,
                "--epochs", 20, "--out-dir", out]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "ann_fit.csv", "ann_loss_trace.csv", "ann_model.json", "ann_report.json"]
    report = json.loads((out / "ann_report.json").read_text())
    assert report["report"]["algorithm"] == "trainbr"
    assert report["seed"] == 42
    assert report["schema_version"] == 1
    fit = rows(out / "ann_fit.csv")
    assert fit[0] == ["index", "partition", "actual_s", "predicted_s"]
    assert len(fit) == 121


def test_train_ann_records_wider_topology(tmp_path, data_csv):
    run(["train-ann", "--algo", "lm", "--hidden", "10,10", "--data", data_csv, "--epochs", 5,
         "--out-dir", tmp_path])
    model = json.loads((tmp_path / "ann_model.json").read_text())
    assert model["topology"]["hidden_widths"] == [10, 10]
    report = json.loads((tmp_path / "ann_report.json").read_text())
    assert report["report"]["details"]["topology"] == [3, 10, 10, 1]


def test_unknown_algorithm_lists_the_six(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train-ann", "--algo", "nadam", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    for name in ("br", "lm", "gd", "gdm", "scg", "oss"):
        assert f"'{name}'" in err


def test_diverged_run_still_exits_zero(tmp_path, data_csv):
    assert run(["train-ann", "--algo", "gd", "--lr", "1e6", "--data", data_csv, "--epochs", 50,
                "--out-dir", tmp_path]) == 0
    text = (tmp_path / "ann_report.json").read_text()
    assert "Infinity" not in text and "NaN" not in text
    report = json.loads(text)["report"]
    assert report["diverged"] is True
    assert report["stop_reason"] == "diverged"


@pytest.mark.parametrize("mfs,order,n_rules", [(2, "linear", 8), (4, "constant", 64)])
def test_train_anfis_rule_count(tmp_path, data_csv, mfs, order, n_rules):
    assert run(["train-anfis", "--mfs", mfs, "--order", order, "--data", data_csv, "--epochs", 3,
                "--out-dir", tmp_path]) == 0
    report = json.loads((tmp_path / "anfis_report.json").read_text())
    assert report["n_rules"] == n_rules
    assert report["report"]["details"]["n_rules"] == n_rules
    trace = rows(tmp_path / "anfis_test_trace.csv")
    assert trace[0] == ["index", "actual_s", "predicted_s"]
    assert len(trace) == 1 + 20


def test_train_anfis_rejects_quadratic(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train-anfis", "--order", "quadratic", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_seed_ranges():
    assert _parse_seeds("1..10") == list(range(1, 11))
    assert _parse_seeds("1..3,7") == [1, 2, 3, 7]


def test_compare_ann_gives_sixty_rows(tmp_path, data_csv):
    assert run(["compare", "--suite", "ann", "--seeds", "1..10", "--data", data_csv,
                "--epochs", 3, "--out-dir", tmp_path]) == 0
    table = rows(tmp_path / "compare_ann.csv")
    assert len(table) == 61
    assert table[0][:8] == ["seed", "training_method", "topology", "number_of_epochs",
                            "training_mse", "test_mse", "network_mse", "r_value"]
    summary = json.loads((tmp_path / "compare.json").read_text())
    assert len(summary["ann"]) == 60


def test_compare_anfis_gives_table_grid(tmp_path, data_csv):
    assert run(["compare", "--suite", "anfis", "--data", data_csv, "--anfis-epochs", 2,
                "--out-dir", tmp_path]) == 0
    table = rows(tmp_path / "compare_anfis.csv")
    assert [(r[1], r[2]) for r in table[1:]] == [("2", "constant"), ("2", "linear"),
                                                  ("4", "constant"), ("4", "linear")]


def test_compare_is_deterministic(tmp_path, data_csv):
    for d in ("a", "b"):
        run(["compare", "--suite", "all", "--data", data_csv, "--epochs", 5, "--anfis-epochs", 3,
             "--out-dir", tmp_path / d])
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["compare.json", "compare_anfis.csv", "compare_ann.csv"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_json_format_switches_tables(tmp_path, data_csv):
    run(["compare", "--suite", "anfis", "--data", data_csv, "--anfis-epochs", 2,
         "--format", "json", "--out-dir", tmp_path])
    records = json.loads((tmp_path / "compare_anfis.json").read_text())
    assert len(records) == 4 and records[0]["sugeno_type"] == "constant"


def test_fit_file_matches_saved_model(tmp_path, data_csv):
    run(["train-ann", "--algo", "lm", "--data", data_csv, "--epochs", 3, "--out-dir", tmp_path])
    fit = rows(tmp_path / "ann_fit.csv")[1:]
    model = NetworkModel.from_dict(json.loads((tmp_path / "ann_model.json").read_text()))
    data = load_csv(data_csv)
    pred = np.sort([float(r[3]) for r in fit])
    np.testing.assert_allclose(pred, np.sort(model.predict(data.inputs)), rtol=1e-13)
    actual = np.sort([float(r[2]) for r in fit])
    np.testing.assert_array_equal(actual, np.sort(data.targets))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_cells_round_trip_exactly(v):
    assert float(_cell(v)) == v


@pytest.fixture(scope="module")
def models(tmp_path_factory, data_csv):
    d = tmp_path_factory.mktemp("models")
    run(["train-ann", "--algo", "lm", "--data", data_csv, "--epochs", 10, "--out-dir", d])
    run(["train-anfis", "--data", data_csv, "--epochs", 3, "--out-dir", d])
    return d


def test_predict_single_triple(models, capsys):
    assert run(["predict", "--model", models / "ann_model.json", "--x", 50, 1000, 600]) == 0
    value = float(capsys.readouterr().out.strip())
    assert np.isfinite(value) and 0 < value < 300


def test_predict_batch(models, data_csv, tmp_path):
    batch = tmp_path / "batch.csv"
    lines = open(data_csv).read().splitlines()[:101]
    batch.write_text("\n".join(lines) + "\n")
    assert run(["predict", "--model", models / "anfis_model.json", "--input", batch,
                "--out-dir", tmp_path, "-o", "pred"]) == 0
    out = rows(tmp_path / "pred.csv")
    assert len(out) == 101
    assert out[0][-1] == "predicted_cycle_time"
    assert all(np.isfinite(float(r[-1])) for r in out[1:])


def test_predict_wrong_kind_is_schema_error(models):
    assert run(["predict", "--model", models / "anfis_model.json", "--kind", "ann",
                "--x", 50, 1000, 600]) == 4


def test_predict_unknown_kind_is_schema_error(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps({"model_kind": "svm"}))
    assert run(["predict", "--model", bad, "--x", 1, 2, 3]) == 4


def test_missing_data_file_is_io_error(tmp_path):
    assert run(["train-ann", "--data", tmp_path / "nope.csv", "--out-dir", tmp_path]) == 3


def test_malformed_data_is_schema_error(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("mould_temp,injection_pressure,switchover_pressure,cycle_time\n1,2,x,4\n")
    assert run(["train-ann", "--data", p, "--out-dir", tmp_path]) == 4


def test_no_shuffle_keeps_file_order(tmp_path, data_csv):
    run(["train-ann", "--algo", "lm", "--data", data_csv, "--epochs", 1, "--no-shuffle",
         "--out-dir", tmp_path])
    fit = rows(tmp_path / "ann_fit.csv")[1:]
    actual = [float(r[2]) for r in fit]
    np.testing.assert_array_equal(actual, load_csv(data_csv).targets)
    report = json.loads((tmp_path / "ann_report.json").read_text())
    assert report["data"]["shuffled_split"] is False
