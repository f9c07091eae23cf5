import csv
import json

import numpy as np
import pytest

from saucebot import cli, dataset, neuralnet, training
from saucebot.config import DEFAULT_CONFIG

from conftest import SAMPLE_DRAWING


def test_dataset_shape(rows):
    assert len(rows) == 420
    missing = [r for r in rows if r.stacking_knots is None]
    assert len(missing) == 126
    assert len({r.liquid for r in missing}) == 6
    assert all(r.viscosity_cp < 30 for r in missing)
    assert all(len(r.feature) == 33 and len(r.flow_knots) == 17 for r in rows)
    assert all(len(r.stacking_knots) == 10 for r in rows if r.stacking_knots is not None)


def test_dataset_header(artifacts):
    header, _ = dataset.read_jsonl(artifacts["data"])
    assert header["format_version"] == 1 and header["seed"] == 42 and header["rows"] == 420


def test_model_files(artifacts):
    names = sorted(p.name for p in artifacts["models"].iterdir())
    assert names == sorted([f"{k}.json" for k in training.KINDS] + [f"{k}_loss.csv" for k in training.KINDS])
    pp = neuralnet.load_model(artifacts["models"] / "pp-flow.json")
    assert pp.n_in == 2 and pp.layer_dims[0] == 2
    with open(artifacts["models"] / "flow_loss.csv") as fh:
        history = list(csv.reader(fh))
    assert len(history) == DEFAULT_CONFIG.epochs + 1


def test_model_roundtrip(artifacts, flow_model, rows, tmp_path):
    x = np.array([r.feature for r in rows[:50]])
    copy = tmp_path / "copy.json"
    neuralnet.save_model(flow_model, copy)
    assert np.array_equal(neuralnet.load_model(copy)(x), flow_model(x))


def test_printed_heldout_error_matches_files(artifacts, flow_model, rows, tmp_path, capsys):
    out = tmp_path / "m"
    assert cli.main(["train", str(artifacts["data"]), "--which", "flow", "--out", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    printed = float(line.split("error ")[1].split()[0])
    model = neuralnet.load_model(out / "flow.json")
    held = set(model.meta["val_liquids"])
    sub = [r for r in rows if r.liquid in held]
    x = np.array([r.feature for r in sub])
    y = np.array([r.flow_knots for r in sub])
    assert abs(printed - training.heldout_error(model, x, y, "flow")) < 1e-9


def test_report_schema(report):
    curves_ = report["curve_errors"]
    assert set(curves_) == {"ours", "simple", "pp", "wf"}
    for m in curves_:
        assert {"flow_ml_s", "stacking_ml_cm"} <= set(curves_[m])
    thick = report["thickness"]
    for m in ("ours", "simple", "pp", "wf"):
        assert {"mean_abs_error_mm", "std_dev_mm", "pct_error", "pct_variance"} <= set(thick[m])
        assert thick[m]["strokes"] == 5 * 3 * 4


def test_wf_has_highest_variance(report):
    thick = report["thickness"]
    wf = thick["wf"]["pct_variance"]
    assert all(wf >= thick[m]["pct_variance"] for m in ("ours", "simple", "pp"))


def test_draw_outputs(artifacts):
    metrics = json.loads(artifacts["svg"].with_suffix(".json").read_text())
    assert metrics["format_version"] == 1 and metrics["strokes"]
    assert artifacts["svg"].read_text().startswith("<?xml")


def test_sample_drawing_truth_curves_no_clamps(tmp_path, capsys):
    out = tmp_path / "truth.svg"
    assert cli.main(["draw", str(SAMPLE_DRAWING), "--truth-curves", "--out", str(out)]) == 0
    strokes = json.loads(out.with_suffix(".json").read_text())["strokes"]
    assert all(s["clamped_speed_samples"] == 0 and s["clamped_cells"] == 0 for s in strokes)


def test_missing_model_file_exit_2(tmp_path, capsys):
    code = cli.main(["benchmark", "--models", str(tmp_path), "--methods", "ours", "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert "flow.json" in capsys.readouterr().err


def test_unknown_model_version_exit_2(tmp_path, capsys):
    (tmp_path / "flow.json").write_text('{"format_version": 9}')
    code = cli.main(["predict", "--models", str(tmp_path), "--liquid", "test-1"])
    assert code == 2
    assert "format_version" in capsys.readouterr().err


def test_unreadable_and_malformed_inputs_exit_2(tmp_path, capsys):
    assert cli.main(["train", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format_version": 7, "kind": "saucebot-dataset"}\n')
    assert cli.main(["train", str(bad), "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert cli.main(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "d.jsonl")]) == 2


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["benchmark"])
    assert exc.value.code == 2


def test_domain_error_exit_1(artifacts, tmp_path, capsys):
    d = tmp_path / "d.json"
    d.write_text(json.dumps({"polylines": []}))
    assert cli.main(["draw", str(d), "--truth-curves", "--out", str(tmp_path / "x.svg")]) == 1
    assert "empty drawing" in capsys.readouterr().err
    assert cli.main(["predict", "--models", str(artifacts["models"]), "--viscosity", "0.1", "--density", "1"]) == 1


def test_predict_writes_curves(artifacts, tmp_path, capsys):
    out = tmp_path / "p.json"
    assert cli.main(["predict", "--models", str(artifacts["models"]), "--liquid", "test-2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["flow"]["time_s"]) == 18 and len(doc["stacking"]["thickness_mm"]) == 10
    assert (tmp_path / "p_flow.csv").exists() and (tmp_path / "p_stacking.csv").exists()


def test_gen_data_is_byte_identical(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps({"n_train_liquids": 4, "n_fill_levels": 3, "test_slots": [1], "test_densities": [1.0]}))
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for p in paths:
        assert cli.main(["gen-data", "--config", str(cfg), "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
