import csv
import json

import numpy as np
import pytest

from holistic_ml.cli import main
from holistic_ml.data import load_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "synthetic.csv"
    assert main(["gen-data", "--rows", "2000", "--seed", "7", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--out-dir", str(root), "--n-rounds", "30",
                 "--valid-fraction", "0.3", "--seed", "1"]) == 0
    return root


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_data_writes_expected_columns(workspace):
    with open(workspace / "synthetic.csv") as fh:
        header = next(csv.reader(fh))
    assert header == [f"X_num{i}" for i in range(1, 10)] + ["label"]
    assert (workspace / "model.json").exists()
    assert (workspace / "train.csv").exists() and (workspace / "valid.csv").exists()


def test_shap_and_importance_outputs(workspace):
    out = workspace / "shap"
    args = ["--model", workspace / "model.json", "--data", workspace / "valid.csv", "--out-dir", out]
    assert run("explain", "shap", *args, "--row", 0) == 0
    doc = json.loads((out / "attributions.json").read_text())
    first = doc[0] if isinstance(doc, list) else doc["rows"][0]
    assert "base_value" in first or "base_value" in doc
    assert run("explain", "importance", *args) == 0
    with open(out / "importance.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "feature" and len(rows) == 10


def test_pdp_outputs(workspace):
    out = workspace / "pdp"
    assert run("explain", "pdp", "--model", workspace / "model.json", "--data", workspace / "valid.csv",
               "--feature", "X_num9", "--grid", 10, "--out-dir", out, "--emit", "csv,json,svg") == 0
    assert (out / "pdp_ice_X_num9.csv").exists()
    assert (out / "pdp_ice_X_num9.svg").read_text().startswith("<svg")
    regions = json.loads((out / "interactions_X_num9.json").read_text())
    assert "regions" in regions


def test_surrogate_and_lime(workspace):
    out = workspace / "other"
    base = ["--model", workspace / "model.json", "--data", workspace / "valid.csv", "--out-dir", out]
    assert run("explain", "surrogate", *base, "--depth", 3, "--seed", 0) == 0
    assert (out / "surrogate.txt").read_text().startswith("split ")
    assert run("explain", "lime", *base, "--segment", "X_num9 > 0", "--top-k", 3) == 0
    assert run("explain", "lime", *base, "--anchor-row", 2, "--seed", 0, "--samples", 300) == 0
    assert json.loads((out / "lime.json").read_text())


def test_debug_commands(workspace):
    out = workspace / "debug"
    base = ["--model", workspace / "model.json", "--data", workspace / "valid.csv", "--out-dir", out]
    assert run("debug", "residuals", *base) == 0
    assert (out / "residuals.csv").exists()
    assert run("debug", "what-if", *base, "--row", 0, "--set", "X_num9=0.5", "--explain") == 0
    doc = json.loads((out / "what_if.json").read_text())
    assert doc["edits"] == {"X_num9": 0.5} or doc["edits"] == {"X_num9": "0.5"}
    assert set(doc["new_attribution"]) == {f"X_num{i}" for i in range(1, 10)}


def test_fairness_audit_on_group_column(workspace, tmp_path):
    frame = load_csv(workspace / "valid.csv", {f"X_num{i}": "numeric" for i in range(1, 10)} | {"label": "target"})
    sex = np.where(frame.values("X_num2") > 0, 2, 1)
    path = tmp_path / "with_sex.csv"
    with open(workspace / "valid.csv") as src, open(path, "w", newline="") as dst:
        rows = list(csv.reader(src))
        writer = csv.writer(dst)
        writer.writerow(rows[0] + ["SEX"])
        for row, s in zip(rows[1:], sex):
            writer.writerow(row + [str(s)])
    base = ["--model", workspace / "model.json", "--data", path, "--out-dir", tmp_path,
            "--group", "SEX", "--protected", 2, "--reference", 1]
    assert run("fairness", "audit", *base) == 0
    doc = json.loads((tmp_path / "fairness_audit.json").read_text())
    assert doc["groups"]["protected"]["counts"]["n"] == int((sex == 2).sum())
    assert run("fairness", "remediate", *base, "--step", 0.05) == 0
    assert "feasible" in json.loads((tmp_path / "remediation.json").read_text())


def test_usage_errors_exit_one(workspace, capsys):
    assert run("explain", "nonsense") == 1
    assert run("gen-data", "--rows", 10) == 1
    assert run("explain", "importance", "--model", workspace / "model.json", "--data", workspace / "valid.csv",
               "--emit", "pdf") == 1
    assert run("train", "--data", workspace / "synthetic.csv", "--valid-fraction", 0.3) == 1
    assert "error" in capsys.readouterr().err


def test_runtime_errors_exit_two(workspace, tmp_path):
    assert run("explain", "importance", "--model", tmp_path / "missing.json", "--data", workspace / "valid.csv") == 2
    assert run("explain", "importance", "--model", workspace / "model.json", "--data", tmp_path / "none.csv") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("explain", "importance", "--model", bad, "--data", workspace / "valid.csv") == 2
