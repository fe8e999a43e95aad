import csv
import json
import os

import numpy as np
import pytest
import yaml

from lsmkit.cli import main
from lsmkit.data import write_factor_table
from lsmkit.pipeline import PipelineError, run_pipeline, validate_config
from lsmkit.synthetic import synthetic_region, synthetic_samples, write_region

FAST = {
    "hyperparameters": {"GBT": {"n_estimators": 10, "max_depth": 3}, "CNN": {"filters": 4, "epochs": 2},
                        "LSTM": {"units": 4, "epochs": 2}, "SVM": {"C": 1}},
    "explain": {"instances": 2, "permutations": 30, "background": 20, "lime": {"n_perturbations": 200}},
}


@pytest.fixture(scope="module")
def region(tmp_path_factory):
    d = tmp_path_factory.mktemp("region")
    rasters, mask, table = synthetic_region(40, 50, seed=1)
    return write_region(rasters, mask, table, d), d


def _config(d, **extra):
    cfg = {"inputs": {"samples": "samples.csv", "rasters": "rasters", "landslides": "landslides.asc"},
           "output": "runs", **FAST}
    cfg.update(extra)
    path = d / f"cfg_{len(list(d.glob('cfg_*')))}.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def _tree_bytes(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_validate_reports_every_problem(region):
    _, d = region
    bad = _config(d, models=["IV", "RandomForest"], factor_sets=["all_19", "all_20"],
                  explain={"methods": ["shap"], "instances": 0}, colour="red",
                  hyperparameters={"GBT": {"depth": 3}})
    diags = validate_config(bad)
    text = "\n".join(diags)
    for needle in ("RandomForest", "all_20", "'shap'", "explain.instances", "'colour'", "'depth'"):
        assert needle in text
    assert validate_config(_config(d)) == []


def test_missing_twi_is_named(tmp_path):
    t = synthetic_samples(60, seed=0)
    keep = [n for n in t.names if n != "TWI"]
    write_factor_table(t.select(keep), tmp_path / "s.csv")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"inputs": {"samples": "s.csv"},
                                                     "factor_sets": ["triggering_9"]}))
    diags = validate_config(tmp_path / "c.yaml")
    assert len(diags) == 1 and "TWI" in diags[0]


def test_minimal_iv_path(region):
    _, d = region
    cfg = _config(d, models=["IV"], factor_sets=[{"name": "toy", "factors": ["Slope", "NDVI"]}])
    res = run_pipeline(cfg, stages=("train", "map"))
    files = sorted(_tree_bytes(res.run_dir))
    assert files == ["manifest.json", "toy/density.csv", "toy/maps/IV.asc", "toy/maps/IV.legend.txt",
                     "toy/maps/IV_score.asc", "toy/models/IV.json", "toy/weights.csv"]
    weights = list(csv.reader(open(os.path.join(res.run_dir, "toy/weights.csv"))))
    assert {r[0] for r in weights[1:]} == {"Slope", "NDVI"}


def test_full_run_is_byte_identical_and_complete(region, tmp_path):
    _, d = region
    cfg = _config(d)
    a = run_pipeline(cfg, out=tmp_path / "a")
    b = run_pipeline(cfg, out=tmp_path / "b")
    ta, tb = _tree_bytes(a.run_dir), _tree_bytes(b.run_dir)
    assert ta == tb
    metrics = list(csv.reader(open(os.path.join(a.run_dir, "metrics.csv"))))
    assert len(metrics) == 1 + 16
    for fs in ("all_19", "triggering_9"):
        for name in ("IV", "WoE", "FR", "LR", "SVM", "GBT", "CNN", "LSTM"):
            assert f"{fs}/models/{name}.json" in ta
            assert f"{fs}/maps/{name}.asc" in ta
            assert f"{fs}/attributions/{name}_lime.csv" in ta
        for name in ("CNN", "LSTM"):
            assert f"{fs}/attributions/{name}_deeplift.csv" in ta
        for f in ("vif.csv", "ols.csv", "weights.csv", "importance.csv", "consistency_matrix.csv",
                  "consistency_topk.csv", "density.csv"):
            assert f"{fs}/{f}" in ta
    man = json.loads(ta["manifest.json"])
    assert man["status"] == "complete" and man["seeds"]["master"] == 0
    assert set(man["outputs"]) == set(ta) - {"manifest.json"}


def test_seed_changes_the_run_directory(region, tmp_path):
    _, d = region
    cfg = _config(d, models=["LR"], factor_sets=["triggering_9"])
    a = run_pipeline(cfg, stages=("train",), out=tmp_path)
    b = run_pipeline(cfg, stages=("train",), out=tmp_path, seed=5)
    assert a.run_dir != b.run_dir and b.manifest["seeds"]["master"] == 5


def test_stage_failure_is_tagged_and_flagged(region, tmp_path):
    paths, d = region
    broken = tmp_path / "rasters"
    broken.mkdir()
    for f in os.listdir(paths["rasters"]):
        if f != "ndvi.asc":
            os.link(os.path.join(paths["rasters"], f), broken / f)
    cfg = _config(d, models=["LR"], factor_sets=["triggering_9"])
    data = yaml.safe_load(cfg.read_text())
    data["inputs"]["rasters"] = str(broken)
    cfg.write_text(yaml.safe_dump(data))
    with pytest.raises(PipelineError) as err:
        run_pipeline(cfg, stages=("train", "map"), out=tmp_path / "out")
    assert err.value.stage == "map" and "NDVI" in str(err.value)
    man = json.load(open(next((tmp_path / "out").glob("*/manifest.json"))))
    assert man["status"] == "failed" and man["partial"] and man["stages"]["train"] == "complete"


def test_cli_exit_codes(region, tmp_path, capsys):
    _, d = region
    good = _config(d, models=["FR", "LR"], factor_sets=["triggering_9"])
    assert main(["validate", "--config", str(good)]) == 0
    assert main(["train", "--config", str(good), "--out", str(tmp_path)]) == 0
    assert main(["evaluate", "--config", str(good), "--out", str(tmp_path), "--model", "LR"]) == 0
    assert "AUC" in capsys.readouterr().out
    bad = _config(d, models=["Forest"])
    assert main(["validate", "--config", str(bad)]) == 1
    assert main(["run", "--config", str(bad)]) == 2
    assert "error [validate]" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_cli_synth_writes_a_valid_config(tmp_path):
    out = tmp_path / "syn"
    assert main(["synth", "--out", str(out), "--nrows", "30", "--ncols", "30"]) == 0
    assert validate_config(out / "config.yaml") == []


def test_explicit_factor_set_override(region, tmp_path):
    _, d = region
    cfg = _config(d, models=["IV"], factor_sets=["all_19", {"name": "pair", "factors": ["Slope", "TWI"]}])
    res = run_pipeline(cfg, stages=("train",), out=tmp_path, factor_sets=["pair"])
    assert os.path.isdir(os.path.join(res.run_dir, "pair")) and not os.path.isdir(
        os.path.join(res.run_dir, "all_19"))
