import csv
import json
import shutil
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from stylemill.cli import main
from stylemill.errors import ConfigError, DataError
from stylemill.features import DIMENSIONS
from stylemill.pipeline import PipelineConfig, rerun, run_pipeline, sample_config_path


@pytest.fixture()
def sample(tmp_path):
    src = sample_config_path().parent
    dst = tmp_path / "sample"
    shutil.copytree(src, dst)
    return dst


def config_for(sample: Path, **paths) -> Path:
    cfg = json.loads((sample / "config.json").read_text())
    cfg["paths"].update(paths)
    path = sample / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_fixture_run_writes_four_reports_and_manifest(sample):
    result = run_pipeline(PipelineConfig.from_file(sample / "config.json"))
    out = sample / "out"
    for dim in DIMENSIONS:
        rep = json.loads((out / f"report_{dim.value}.json").read_text())
        assert rep["dimension"] == dim.value
        assert 0 <= rep["accuracy_st"] <= 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["schema"] == "stylemill.manifest/1"
    assert manifest["config"]["seed"] == 7
    assert set(manifest["inputs"]) >= {"events", "ils"}
    assert {f"report_{d.value}.json" for d in DIMENSIONS} <= set(manifest["outputs"])
    assert result.summary["n_students"] == 50
    ET.parse(out / "summary.svg")
    with open(out / "summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_rerun_is_byte_identical(sample, tmp_path):
    run_pipeline(PipelineConfig.from_file(sample / "config.json"))
    first = sample / "out"
    _, differing = rerun(first / "manifest.json", tmp_path / "again")
    assert differing == []
    for dim in DIMENSIONS:
        name = f"report_{dim.value}.json"
        assert (first / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    for name in ("summary.json", "summary.csv", "summary.svg", "dataset.json", "events.csv"):
        assert (first / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_rerun_detects_changed_input(sample):
    run_pipeline(PipelineConfig.from_file(sample / "config.json"))
    with open(sample / "events.csv", "a") as fh:
        fh.write("\n")
    with pytest.raises(DataError, match="changed"):
        rerun(sample / "out" / "manifest.json")


def test_missing_mapping_fails_before_compute(sample, capsys):
    cfg = config_for(sample, mapping="nope.json")
    assert main(["run", "--config", str(cfg)]) == 1
    assert "nope.json" in capsys.readouterr().err
    assert not (sample / "out").exists()


def test_seed_is_mandatory(sample):
    cfg = json.loads((sample / "config.json").read_text())
    del cfg["seed"]
    with pytest.raises(ConfigError, match="seed"):
        PipelineConfig.from_dict(cfg, sample)


def test_failed_stage_is_flagged_in_manifest(sample):
    (sample / "ils.csv").write_text("user_id,q1\nx,a\n")
    with pytest.raises(DataError):
        run_pipeline(PipelineConfig.from_file(sample / "config.json"))
    manifest = json.loads((sample / "out" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["error"]["exit_code"] == 2
    assert "events.csv" in manifest["outputs"]


def test_run_overrides(sample, tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--config", str(sample / "config.json"), "--seed", "3",
                 "--dimension", "Input", "--out-dir", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
    assert [p.name for p in sorted(out.glob("report_*.json"))] == ["report_Input.json"]


# ------------------------------------------------------------------ CLI


def run(*argv):
    return main([str(a) for a in argv])


def test_cli_stage_by_stage(sample, tmp_path, capsys):
    w = tmp_path / "w"
    assert run("ingest", "--input", sample / "events.csv", "--out", w / "events.csv", "--report", w / "clean.json") == 0
    assert json.loads((w / "clean.json").read_text())["rows_dropped_malformed"] == 2
    assert run("features", "--events", w / "events.csv", "--ils", sample / "ils.csv", "--out", w / "ds.json") == 0
    ds = w / "ds.json"
    common = ["--dataset", ds, "--dimension", "Processing", "--seed", 1]
    assert run("split", *common, "--ratio", 0.5, "--folds", 3, "--out", w / "split.json") == 0
    split = json.loads((w / "split.json").read_text())
    assert split["counts"]["L"] + split["counts"]["U"] == 50 and split["folds"]["k"] == 3 and len(split["folds"]["assignments"]) == split["counts"]["L"]
    assert run("train", *common, "--model", "tree", "--out", w / "tree.json") == 0
    assert run("selftrain", *common, "--ratio", 0.5, "--final", "nb", "--out", w / "st.json") == 0
    st = json.loads((w / "st.json").read_text())
    assert 0 <= st["hidden_evaluation"]["accuracy_st"] <= 1
    assert run("tritrain", *common, "--ratio", 0.5, "--base", "nb,tree,svm", "--out", w / "tt.json") == 0
    assert run("eval", *common, "--model", "svm", "--k", 5, "--out", w / "cv.json") == 0
    assert json.loads((w / "cv.json").read_text())
    assert run("eval", *common, "--model-file", w / "tree.json", "--out", w / "ev.json") == 0
    sweep = ["--dataset", ds, "--dimension", "Processing", "--seeds", "0-1"]
    assert run("sweep", *sweep, "--ratios", "0.5,1.0", "--kinds", "nb", "--out", w / "sw.json") == 0
    assert len(json.loads((w / "sw.json").read_text())["rows"]) == 4
    assert run("compare", *sweep, "--ratio", 0.5, "--kind", "nb", "--out", w / "cmp.json") == 0
    for fmt, name in (("csv", "sw.csv"), ("svg", "sw.svg"), ("json", "sw2.json")):
        assert run("report", "--run", w / "sw.json", "--format", fmt, "--out", w / name) == 0
    ET.parse(w / "sw.svg")
    assert run("report", "--run", w / "cmp.json", "--format", "svg", "--out", w / "cmp.svg") == 0


def test_cli_ttest(tmp_path, capsys):
    assert run("ttest", "--a", "2,4,5", "--b", "1,2,3") == 0
    res = json.loads(capsys.readouterr().out)
    assert res["t_value"] == pytest.approx(5.0) and res["p_value"] == pytest.approx(0.0377, abs=1e-4)
    pairs = tmp_path / "p.csv"
    pairs.write_text("a,b\n2,1\n4,2\n5,3\n")
    assert run("ttest", "--pairs", pairs) == 0
    assert run("ttest", "--a", "1,2,3", "--b", "1,2,3") == 3
    assert "constant differences" in capsys.readouterr().err


def test_cli_synth_and_rerun(tmp_path, sample):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_students": 40, "separation": 1.5, "labeled_fraction": 0.5}))
    assert run("synth", "--spec", spec, "--seed", 4, "--out", tmp_path / "syn.json") == 0
    ds = json.loads((tmp_path / "syn.json").read_text())
    assert len(ds["rows"]) == 40
    truth = json.loads((tmp_path / "syn_truth.json").read_text())
    assert len(truth["labels"]) == 40
    assert run("run", "--config", sample / "config.json") == 0
    assert run("rerun", "--manifest", sample / "out" / "manifest.json", "--out-dir", tmp_path / "r") == 0


def test_cli_exit_codes(tmp_path, capsys):
    assert run("split", "--dataset", "x.json", "--dimension", "Processing", "--ratio", 0.5) == 1
    assert "seed" in capsys.readouterr().err
    assert run("bogus") == 1
    assert run("split", "--dataset", tmp_path / "missing.json", "--dimension", "Processing", "--ratio", 0.5, "--seed", 0) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("split", "--dataset", bad, "--dimension", "Processing", "--ratio", 0.5, "--seed", 0) == 2
    assert run("split", "--dataset", bad, "--dimension", "Nope", "--ratio", 0.5, "--seed", 0) == 1
    assert run("--version") == 0
