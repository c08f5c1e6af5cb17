import pytest

from holistic_ml.cli import main
from holistic_ml.report import ReportOptions, build_report
from holistic_ml.data import SyntheticConfig, generate_synthetic, split
from holistic_ml.models import train_gbm

SECTIONS = [
    "## Data summary", "## Model card", "## Global Shapley importance", "## Partial dependence and ICE",
    "## Surrogate decision tree", "## Segment LIME", "## Residuals by group", "## Fairness audit",
    "## Remediation",
]


@pytest.fixture(scope="module")
def small():
    frame = generate_synthetic(SyntheticConfig(3000, seed=2))
    train, valid = split(frame, 0.3, seed=2)
    return train_gbm(train, n_rounds=40), valid


def test_sections_in_workflow_order(small):
    model, valid = small
    text = build_report(model, valid, ReportOptions(seed=0, pdp_features=["X_num9"], segment="X_num9 > 0"))
    positions = [text.index(s) for s in SECTIONS]
    assert positions == sorted(positions)
    assert "Interaction finding: ICE curves for X_num9 diverge" in text


def test_report_is_deterministic(small):
    model, valid = small
    opts = ReportOptions(seed=3, pdp_features=["X_num9", "X_num1"])
    assert build_report(model, valid, opts) == build_report(model, valid, opts)


def test_cli_report_byte_identical(tmp_path):
    data = tmp_path / "d.csv"
    assert main(["gen-data", "--rows", "1500", "--seed", "4", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--out-dir", str(tmp_path), "--n-rounds", "20"]) == 0
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["report", "--model", str(tmp_path / "model.json"), "--data", str(data),
                     "--seed", "5", "--out-dir", str(out)]) == 0
        outputs.append(((out / "report.md").read_bytes(), (out / "importance.csv").read_bytes()))
    assert outputs[0] == outputs[1]


def test_missing_prerequisite_exits_two(tmp_path, capsys):
    rc = main(["report", "--model", str(tmp_path / "model.json"), "--data", str(tmp_path / "d.csv"),
               "--seed", "1", "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "missing prerequisite" in capsys.readouterr().err
