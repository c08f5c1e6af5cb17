"""Markdown report covering the whole workflow, recomputed from a model file and a dataset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Frame, filter_segment
from .debug import residuals_by_group
from .errors import DataError
from .explain import (
    MARGIN,
    fit_surrogate_tree,
    global_importance,
    interaction_regions,
    lime_segment,
    pdp_ice,
    tree_rules,
    tree_shap_local,
)
from .fairness import GroupSpec, audit, four_fifths_flags, remediate_cutoff
from .models import GbmModel, LinearModel, TreeModel, accuracy, auc, predict_proba


@dataclass
class ReportOptions:
    seed: int
    pdp_features: Sequence[str] = ()
    grid_size: int = 20
    surrogate_depth: int = 3
    segment: str | None = None
    encode: Sequence[str] = ()
    top_k: int = 7
    residual_group: str | None = None
    group: GroupSpec | None = None
    remediation_step: float = 0.01
    top_features: int = 10
    notes: list[str] = field(default_factory=list)


def num(value: float | None, digits: int = 4) -> str:
    if value is None:
        return "undefined"
    return f"{value:.{digits}f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return out


def _model_kind(model) -> str:
    if isinstance(model, GbmModel):
        return "gradient boosted trees"
    if isinstance(model, TreeModel):
        return "decision tree"
    if isinstance(model, LinearModel):
        return "linear model"
    return type(model).__name__


def build_report(model, frame: Frame, opts: ReportOptions) -> str:
    if frame.target_name is None:
        raise DataError("report needs labelled data (no target column)")
    lines = ["# Model report", ""]
    y = frame.target
    p = predict_proba(model, frame)
    tree_based = isinstance(model, (TreeModel, GbmModel))

    lines += ["## Data summary", ""]
    lines += _table(["rows", "features", "target", "positive rate"],
                    [[frame.n_rows, len(model.feature_names), frame.target_name, num(float(y.mean()))]])
    lines.append("")

    lines += ["## Model card", ""]
    card = [["kind", _model_kind(model)], ["features", ", ".join(model.feature_names)]]
    if isinstance(model, GbmModel):
        card += [["trees", str(len(model.trees))], ["base score (log-odds)", num(model.base_score)]]
        if any(model.monotone.values()):
            card.append(["monotone constraints",
                         ", ".join(f"{k}:{v:+d}" for k, v in model.monotone.items() if v)])
    for key in sorted(model.params):
        card.append([key, repr(model.params[key])])
    card += [["AUC", num(auc(p, y))], ["accuracy at 0.5", num(accuracy(p, y))]]
    lines += _table(["property", "value"], card)
    lines.append("")

    importance = {}
    lines += ["## Global Shapley importance", ""]
    if tree_based:
        importance = global_importance(model, frame)
        space = "margin (log-odds)" if isinstance(model, GbmModel) else "model output"
        lines.append(f"Mean absolute Shapley value per feature, in {space} units.")
        lines.append("")
        ranked = list(importance.items())[: opts.top_features]
        lines += _table(["rank", "feature", "mean abs attribution"],
                        [[i + 1, f, num(v, 6)] for i, (f, v) in enumerate(ranked)])
    else:
        lines.append("Not available: tree Shapley values need a tree-based model.")
    lines.append("")

    lines += ["## Partial dependence and ICE", ""]
    features = list(opts.pdp_features) or list(importance)[:2]
    if not features:
        lines.append("No features selected.")
    for feat in features:
        curves = pdp_ice(model, frame, feat, grid_size=opts.grid_size)
        regions = interaction_regions(curves)
        lines.append(f"### {feat}")
        lines.append("")
        lines += _table(["grid value", "partial dependence", "ICE divergence"],
                        [[num(g), num(d), num(v)] for g, d, v in zip(curves.grid, curves.pdp, curves.divergence)])
        lines.append("")
        if regions:
            spans = ", ".join(f"[{num(a)}, {num(b)}]" for a, b in regions)
            lines.append(f"Interaction finding: ICE curves for {feat} diverge over {spans}.")
        else:
            lines.append(f"No interaction finding for {feat}: ICE curves stay parallel.")
        lines.append("")

    lines += ["## Surrogate decision tree", ""]
    fit = fit_surrogate_tree(model, frame, depth=opts.surrogate_depth, seed=opts.seed)
    lines.append(f"Depth {opts.surrogate_depth} surrogate of {fit.reference}; held-out fidelity "
                 f"R2 {num(fit.fidelity_r2)}, RMSE {num(fit.fidelity_rmse)} "
                 f"({fit.n_train} fitting rows, {fit.n_holdout} held out).")
    lines += ["", "```"] + tree_rules(fit.surrogate) + ["```", ""]

    lines += ["## Segment LIME", ""]
    if opts.segment:
        segment = filter_segment(frame, opts.segment)
        result = lime_segment(model, segment, opts.encode, top_k=opts.top_k, label=opts.segment)
        lines.append(f"Linear surrogate on `{opts.segment}` ({segment.n_rows} rows): intercept "
                     f"{num(result.intercept)}, R2 {num(result.r_squared)}.")
        lines.append("")
        lines += _table(["feature", "coefficient"], [[f, f"{c:.4e}"] for f, c in result.coefficients.items()])
    else:
        lines.append("Not requested.")
    lines.append("")

    lines += ["## Residuals by group", ""]
    group_feature = opts.residual_group or (list(importance)[0] if importance else None)
    res = residuals_by_group(model, frame, group_feature)
    lines.append(f"Deviance residuals grouped by {group_feature or 'nothing (all rows)'}.")
    lines.append("")
    lines += _table(["value", "count", "mean", "mean abs", "min", "max"],
                    [[g.value, g.count, num(g.mean), num(g.mean_abs), num(g.min), num(g.max)] for g in res.groups])
    lines.append("")

    lines += ["## Fairness audit", ""]
    spec = opts.group
    if spec is None:
        lines += ["Not requested.", "", "## Remediation", "", "Not requested.", ""]
    else:
        report = audit(model, frame, spec)
        flags = four_fifths_flags(report)
        conf = report.confusion
        lines.append(f"Protected {spec.feature} in {list(spec.protected)}, reference {list(spec.reference)}, "
                     f"cutoff {spec.cutoff}; favorable outcome is a predicted negative.")
        lines.append("")
        lines += _table(
            ["group", "n", "TP", "FP", "TN", "FN", "favorable rate", "false omissions rate"],
            [[name, c.n, c.tp, c.fp, c.tn, c.fn, num(float(c.favorable_rate)),
              num(None if c.false_omission_rate is None else float(c.false_omission_rate))]
             for name, c in (("protected", conf.protected), ("reference", conf.reference))],
        )
        lines.append("")
        lines += _table(["metric", "value", "four-fifths"],
                        [["adverse impact ratio", num(report.air), flags["air"]],
                         ["false omissions rate disparity", num(report.for_disparity), flags["for_disparity"]]])
        lines += ["", "## Remediation", ""]
        rem = remediate_cutoff(model, frame, spec, step=opts.remediation_step)
        if rem.feasible:
            lines.append(f"Cutoff {rem.original_cutoff} -> {rem.cutoff}: adverse impact ratio "
                         f"{num(rem.report.air)}, false omissions rate disparity {num(rem.report.for_disparity)}; "
                         f"accuracy {num(rem.accuracy_before)} -> {num(rem.accuracy_after)} "
                         f"(change {num(rem.accuracy_delta)}).")
        else:
            lines.append(f"Infeasible: {rem.reason}.")
        lines.append("")

    if tree_based:
        lines += ["## Per-decision explanation", ""]
        top = int(np.argmax(p))
        row = frame.take([top])
        attr = tree_shap_local(model, row)
        unit = "log-odds" if attr.output_space == MARGIN else attr.output_space
        lines.append(f"Highest-scored row (index {top}, score {num(float(p[top]))}); "
                     f"base {num(attr.base_value)} + attributions = {num(attr.output)} {unit}.")
        lines.append("")
        lines += _table(["feature", "attribution"], [[f, num(v, 6)] for f, v in attr.ranked()[:5]])
        lines.append("")

    for note in opts.notes:
        lines.append(f"Note: {note}")
    return "\n".join(lines).rstrip("\n") + "\n"
