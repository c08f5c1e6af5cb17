"""Command-line entry point: ``holistic-ml <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data or model error.
Every output file lands under ``--out-dir`` with a fixed name.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import svg
from .data import (
    UCI_TARGETS,
    SyntheticConfig,
    filter_segment,
    generate_synthetic,
    infer_schema,
    load_csv,
    split,
    write_csv,
)
from .debug import residuals_by_group, what_if
from .errors import DataError, HolisticMLError
from .explain import (
    fit_surrogate_tree,
    global_importance,
    interaction_regions,
    lime_perturb,
    lime_segment,
    pdp_ice,
    shap_matrix,
    tree_rules,
)
from .fairness import GroupSpec, audit, remediate_cutoff, report_to_dict
from .models import (
    GbmModel,
    TreeModel,
    auc,
    design_matrix,
    load_model,
    model_to_dict,
    monotone_from_correlation,
    predict_proba,
    save_model,
    train_gbm,
    train_tree,
)
from .report import ReportOptions, build_report

EMIT_CHOICES = ("csv", "json", "svg")
DEFAULT_TARGETS = ("label", *UCI_TARGETS)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- helpers -------------------------------------------------------------------

def _csv_list(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _num(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_rows(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _num(c) for c in row])


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_frame(args, require_target: bool = False):
    path = args.data
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    target = args.target or next((t for t in DEFAULT_TARGETS if t in header), None)
    if require_target and target is None:
        raise DataError(f"{path}: no target column; pass --target")
    skip = list(_csv_list(args.drop)) + [h for h in header if h.upper() == "ID" and h not in _csv_list(args.drop)]
    schema = infer_schema(path, target=target, categorical=_csv_list(args.categorical), skip=skip)
    return load_csv(path, schema)


def _emit(args) -> set[str]:
    chosen = set(_csv_list(args.emit))
    bad = chosen - set(EMIT_CHOICES)
    if bad:
        raise UsageError(f"--emit accepts {','.join(EMIT_CHOICES)}; got {','.join(sorted(bad))}")
    return chosen


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _load_model(path: str):
    if not os.path.isfile(path):
        raise DataError(f"no such model file: {path}")
    return load_model(path)


def _row_index(frame, index: int) -> int:
    if not 0 <= index < frame.n_rows:
        raise DataError(f"row {index} out of range for {frame.n_rows} rows")
    return index


def _group_spec(args) -> GroupSpec:
    return GroupSpec(args.group, tuple(_csv_list(args.protected)), tuple(_csv_list(args.reference)), args.cutoff)


# -- commands ------------------------------------------------------------------

def cmd_gen_data(args) -> None:
    cfg = SyntheticConfig(n_rows=args.rows, n_features=args.features, seed=args.seed,
                          noise_rate=args.noise, threshold=args.threshold)
    frame = generate_synthetic(cfg)
    out = args.out
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_csv(frame, out)
    print(f"wrote {frame.n_rows} rows to {out}")


def _parse_monotone(text: str | None, frame, features) -> dict[str, int]:
    if not text:
        return {}
    if text == "auto":
        return monotone_from_correlation(frame, features)
    out = {}
    for item in _csv_list(text):
        name, _, direction = item.rpartition(":")
        if not name or direction not in ("+1", "1", "-1", "0"):
            raise UsageError(f"bad --monotone entry {item!r}; use FEATURE:+1 or FEATURE:-1")
        out[name] = int(direction)
    return out


def cmd_train(args) -> None:
    frame = _load_frame(args, require_target=True)
    train, valid = frame, None
    if args.valid_fraction:
        if args.seed is None:
            raise UsageError("--valid-fraction needs --seed")
        train, valid = split(frame, args.valid_fraction, args.seed)
        write_csv(train, _out(args, "train.csv"))
        write_csv(valid, _out(args, "valid.csv"))
    features = _csv_list(args.features) or None
    if args.model_type == "tree":
        model = train_tree(train, max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf,
                           features=features)
    else:
        names = features or train.feature_names
        model = train_gbm(train, n_rounds=args.n_rounds, learning_rate=args.learning_rate,
                          max_depth=args.max_depth, l2=args.l2, min_samples_leaf=args.min_samples_leaf,
                          monotone=_parse_monotone(args.monotone, train, names), features=features)
    out = args.out or _out(args, "model.json")
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    save_model(model, out)
    summary = {"model": out, "train_rows": train.n_rows, "train_auc": auc(predict_proba(model, train), train.target)}
    if valid is not None:
        summary["valid_rows"] = valid.n_rows
        summary["valid_auc"] = auc(predict_proba(model, valid), valid.target)
    print(json.dumps(summary, sort_keys=True))


def cmd_explain_shap(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    x = design_matrix(model, frame)
    if args.row is not None:
        rows = [_row_index(frame, args.row)]
        x = x[rows]
    else:
        rows = list(range(len(x)))
    phi, base, out, space = shap_matrix(model, x, args.space)
    names = list(model.feature_names)
    if "csv" in emit:
        _write_rows(_out(args, "attributions.csv"), ["row_id", *names, "base_value", "output", "output_space"],
                    ([r, *phi[i], base[i], out[i], space] for i, r in enumerate(rows)))
    if "json" in emit:
        _write_json(_out(args, "attributions.json"), {
            "output_space": space,
            "rows": [{"row_id": r, "base_value": float(base[i]), "output": float(out[i]),
                      "phi": dict(zip(names, phi[i].tolist()))} for i, r in enumerate(rows)],
        })
    print(f"explained {len(rows)} rows in {space} space")


def cmd_explain_importance(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    imp = global_importance(model, frame, args.space)
    if "csv" in emit:
        _write_rows(_out(args, "importance.csv"), ["feature", "mean_abs_attribution"], imp.items())
    if "json" in emit:
        _write_json(_out(args, "importance.json"), {"importance": [[k, v] for k, v in imp.items()]})
    for k, v in imp.items():
        print(f"{k}\t{v:.6f}")


def cmd_explain_pdp(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    curves = pdp_ice(model, frame, args.feature, grid_size=args.grid, space=args.space)
    regions = interaction_regions(curves, factor=args.factor, baseline=args.baseline)
    feat = args.feature
    if "csv" in emit:
        header = ["grid", "pdp", "divergence"]
        cols = [curves.grid, curves.pdp, curves.divergence]
        if args.ice:
            header += [f"ice_{i}" for i in range(len(curves.ice))]
            cols += list(curves.ice)
        _write_rows(_out(args, f"pdp_ice_{feat}.csv"), header, zip(*cols))
    if "json" in emit:
        _write_json(_out(args, f"interactions_{feat}.json"), {
            "feature": feat, "baseline": args.baseline, "factor": args.factor,
            "regions": [list(r) for r in regions],
        })
    if "svg" in emit:
        lines = (list(curves.ice) if args.ice else []) + [curves.pdp]
        _write_text(_out(args, f"pdp_ice_{feat}.svg"),
                    svg.line_chart(curves.grid, lines, f"PDP and ICE for {feat}", feat, curves.output_space,
                                   highlight=[len(lines) - 1]))
    if regions:
        for a, b in regions:
            print(f"interaction region for {feat}: [{a:.4f}, {b:.4f}]")
    else:
        print(f"no interaction region for {feat}")


def cmd_explain_surrogate(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    fit = fit_surrogate_tree(model, frame, depth=args.depth, seed=args.seed)
    rules = tree_rules(fit.surrogate)
    if "json" in emit:
        _write_json(_out(args, "surrogate.json"), {
            "reference": fit.reference, "fidelity_r2": fit.fidelity_r2, "fidelity_rmse": fit.fidelity_rmse,
            "n_train": fit.n_train, "n_holdout": fit.n_holdout, "tree": model_to_dict(fit.surrogate),
        })
    _write_text(_out(args, "surrogate.txt"), "\n".join(rules) + "\n")
    print(f"fidelity R2 {fit.fidelity_r2:.4f}, RMSE {fit.fidelity_rmse:.4f}")
    print("\n".join(rules))


def cmd_explain_lime(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    if (args.segment is None) == (args.anchor_row is None):
        raise UsageError("give exactly one of --segment or --anchor-row")
    if args.segment is not None:
        segment = filter_segment(frame, args.segment)
        result = lime_segment(model, segment, _csv_list(args.encode), top_k=args.top_k, label=args.segment)
    else:
        if args.seed is None:
            raise UsageError("--anchor-row needs --seed")
        anchor = frame.take([_row_index(frame, args.anchor_row)])
        result = lime_perturb(model, anchor, frame, n_samples=args.samples, kernel_width=args.kernel_width,
                              top_k=args.top_k, seed=args.seed)
    if "csv" in emit:
        _write_rows(_out(args, "lime.csv"), ["feature", "coefficient"],
                    [("(intercept)", result.intercept), *result.coefficients.items()])
    if "json" in emit:
        _write_json(_out(args, "lime.json"), {
            "mode": result.mode, "segment": result.segment, "anchor": result.anchor,
            "kernel_width": result.kernel_width, "n_samples": result.n_samples,
            "intercept": result.intercept, "r_squared": result.r_squared,
            "coefficients": dict(result.coefficients),
        })
    print(f"intercept {result.intercept:.4f}, R2 {result.r_squared:.4f}")
    for k, v in result.coefficients.items():
        print(f"{k}\t{v:.4e}")


def cmd_debug_residuals(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args, require_target=True)
    res = residuals_by_group(model, frame, args.group)
    if "csv" in emit:
        _write_rows(_out(args, "residuals.csv"), ["row_id", "group_value", "label", "prediction", "residual"],
                    ((i, res.group_values[i], int(res.labels[i]), res.predictions[i], res.residuals[i])
                     for i in range(len(res.residuals))))
        _write_rows(_out(args, "residual_groups.csv"), ["group_value", "count", "mean", "mean_abs", "min", "max"],
                    ((g.value, g.count, g.mean, g.mean_abs, g.min, g.max) for g in res.groups))
    if "json" in emit:
        _write_json(_out(args, "residual_groups.json"), {
            "group_feature": res.group_feature,
            "groups": [vars(g) for g in res.groups],
        })
    if "svg" in emit:
        _write_text(_out(args, "residuals.svg"),
                    svg.scatter_chart(res.predictions, res.residuals, res.group_values if args.group else None,
                                      "Deviance residuals", "prediction", "residual"))
    for g in res.groups:
        print(f"{g.value}\tn={g.count}\tmean={g.mean:.4f}")


def cmd_debug_what_if(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args)
    edits = {}
    for item in args.set or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"bad --set {item!r}; use FEATURE=VALUE")
        edits[name.strip()] = value.strip()
    row = frame.take([_row_index(frame, args.row)])
    result = what_if(model, row, edits, explain=args.explain)
    doc = {"row_id": args.row, "edits": edits, "old_output": result.old_output,
           "new_output": result.new_output, "delta": result.delta}
    if args.explain:
        doc["old_attribution"] = dict(result.old_attribution.phi)
        doc["new_attribution"] = dict(result.new_attribution.phi)
        doc["output_space"] = result.new_attribution.output_space
    if "json" in emit:
        _write_json(_out(args, "what_if.json"), doc)
    print(f"{result.old_output:.6f} -> {result.new_output:.6f} (delta {result.delta:+.6f})")


def cmd_fairness_audit(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args, require_target=True)
    spec = _group_spec(args)
    report = audit(model, frame, spec)
    doc = report_to_dict(report, spec)
    if "json" in emit:
        _write_json(_out(args, "fairness_audit.json"), doc)
    if "csv" in emit:
        rows = []
        for name in ("protected", "reference"):
            g = doc["groups"][name]
            rows.append([name, "|".join(g["values"]), *g["counts"].values(), g["rates"]["favorable_rate"],
                         g["rates"]["false_omission_rate"]])
        _write_rows(_out(args, "fairness_audit.csv"),
                    ["group", "values", "tp", "fp", "tn", "fn", "n", "favorable_rate", "false_omission_rate"], rows)
    for metric, value in doc["metrics"].items():
        print(f"{metric}\t{_num(value) or 'undefined'}\t{doc['flags'][metric]}")


def cmd_fairness_remediate(args) -> None:
    emit = _emit(args)
    model = _load_model(args.model)
    frame = _load_frame(args, require_target=True)
    spec = _group_spec(args)
    metrics = _csv_list(args.metrics)
    rem = remediate_cutoff(model, frame, spec, metrics=metrics, step=args.step)
    doc = {"feasible": rem.feasible, "original_cutoff": rem.original_cutoff, "cutoff": rem.cutoff,
           "accuracy_before": rem.accuracy_before, "accuracy_after": rem.accuracy_after,
           "accuracy_delta": rem.accuracy_delta, "reason": rem.reason, "metrics": metrics,
           "audit": report_to_dict(rem.report, spec.with_cutoff(rem.cutoff)) if rem.feasible else None}
    if "json" in emit:
        _write_json(_out(args, "remediation.json"), doc)
    if rem.feasible:
        print(f"cutoff {rem.original_cutoff} -> {rem.cutoff} (accuracy change {rem.accuracy_delta:+.4f})")
    else:
        print(f"infeasible: {rem.reason}")


def cmd_report(args) -> None:
    if not os.path.isfile(args.model):
        raise DataError(f"missing prerequisite: model file {args.model} (run the train stage first)")
    if not os.path.isfile(args.data):
        raise DataError(f"missing prerequisite: data file {args.data} (run gen-data or supply validation data)")
    model = _load_model(args.model)
    frame = _load_frame(args, require_target=True)
    group = _group_spec(args) if args.group else None
    opts = ReportOptions(
        seed=args.seed, pdp_features=_csv_list(args.pdp_features), grid_size=args.grid,
        surrogate_depth=args.surrogate_depth, segment=args.segment, encode=_csv_list(args.encode),
        top_k=args.top_k, residual_group=args.residual_group, group=group,
    )
    text = build_report(model, frame, opts)
    _write_text(_out(args, "report.md"), text)
    if "csv" in _emit(args) and isinstance(model, (TreeModel, GbmModel)):
        imp = global_importance(model, frame)
        _write_rows(_out(args, "importance.csv"), ["feature", "mean_abs_attribution"], imp.items())
    print(f"wrote {_out(args, 'report.md')}")


# -- parser --------------------------------------------------------------------

def _data_args(p, model: bool = True) -> None:
    if model:
        p.add_argument("--model", required=True, help="model JSON written by train")
    p.add_argument("--data", required=True, help="CSV input")
    p.add_argument("--target", help="target column (default: label or the credit default column)")
    p.add_argument("--categorical", help="comma-separated categorical columns")
    p.add_argument("--drop", help="comma-separated columns to ignore")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--emit", default="csv,json", help="outputs to write: csv,json,svg")


def _group_args(p) -> None:
    p.add_argument("--group", required=True, help="group column, e.g. SEX")
    p.add_argument("--protected", required=True, help="protected value(s), comma-separated")
    p.add_argument("--reference", required=True, help="reference value(s), comma-separated")
    p.add_argument("--cutoff", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="holistic-ml", description="Train, explain, debug and audit tabular models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("gen-data", help="write the synthetic interaction dataset")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--features", type=int, default=9)
    p.add_argument("--threshold", type=float, default=0.42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a decision tree or boosted ensemble")
    _data_args(p, model=False)
    p.add_argument("--model-type", choices=("tree", "gbm"), default="gbm")
    p.add_argument("--out", help="model path (default: <out-dir>/model.json)")
    p.add_argument("--features", help="comma-separated feature subset")
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--n-rounds", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--monotone", help="FEATURE:+1,FEATURE:-1 or 'auto' (sign of correlation)")
    p.add_argument("--valid-fraction", type=float, help="hold out this share as valid.csv")
    p.add_argument("--seed", type=int, help="split seed (required with --valid-fraction)")
    p.set_defaults(func=cmd_train)

    explain = sub.add_parser("explain", help="explanations").add_subparsers(dest="action", required=True,
                                                                           parser_class=Parser)
    p = explain.add_parser("shap", help="per-row Shapley attributions")
    _data_args(p)
    p.add_argument("--row", type=int, help="explain only this row")
    p.add_argument("--space", choices=("margin", "probability"), help="output space for boosted models")
    p.set_defaults(func=cmd_explain_shap)

    p = explain.add_parser("importance", help="global mean |Shapley| importance")
    _data_args(p)
    p.add_argument("--space", choices=("margin", "probability"))
    p.set_defaults(func=cmd_explain_importance)

    p = explain.add_parser("pdp", help="partial dependence, ICE and interaction regions")
    _data_args(p)
    p.add_argument("--feature", required=True)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--ice", action="store_true", help="include every ICE curve in the CSV and SVG")
    p.add_argument("--space", choices=("margin", "probability"), default="probability")
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--baseline", choices=("peak", "median"), default="peak")
    p.set_defaults(func=cmd_explain_pdp)

    p = explain.add_parser("surrogate", help="surrogate decision tree")
    _data_args(p)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_explain_surrogate)

    p = explain.add_parser("lime", help="segment or perturbation LIME")
    _data_args(p)
    p.add_argument("--segment", help="row filter such as 'PAY_0 > 1'")
    p.add_argument("--encode", help="columns to one-hot for segment LIME")
    p.add_argument("--anchor-row", type=int, help="row index for perturbation LIME")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--kernel-width", type=float)
    p.add_argument("--top-k", type=int, default=7)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_explain_lime)

    debug = sub.add_parser("debug", help="model debugging").add_subparsers(dest="action", required=True,
                                                                          parser_class=Parser)
    p = debug.add_parser("residuals", help="deviance residuals, optionally by group")
    _data_args(p)
    p.add_argument("--group", help="group residuals by this column")
    p.set_defaults(func=cmd_debug_residuals)

    p = debug.add_parser("what-if", help="rescore one row after edits")
    _data_args(p)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--set", action="append", help="FEATURE=VALUE, repeatable")
    p.add_argument("--explain", action="store_true", help="re-explain both versions of the row")
    p.set_defaults(func=cmd_debug_what_if)

    fair = sub.add_parser("fairness", help="disparate impact").add_subparsers(dest="action", required=True,
                                                                             parser_class=Parser)
    p = fair.add_parser("audit", help="group confusion matrices and ratio metrics")
    _data_args(p)
    _group_args(p)
    p.set_defaults(func=cmd_fairness_audit)

    p = fair.add_parser("remediate", help="search for a cutoff passing the four-fifths band")
    _data_args(p)
    _group_args(p)
    p.add_argument("--metrics", default="air,for_disparity")
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_fairness_remediate)

    p = sub.add_parser("report", help="combined markdown report")
    _data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--pdp-features", help="features to sweep (default: top two by importance)")
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--surrogate-depth", type=int, default=3)
    p.add_argument("--segment")
    p.add_argument("--encode")
    p.add_argument("--top-k", type=int, default=7)
    p.add_argument("--residual-group")
    p.add_argument("--group")
    p.add_argument("--protected", default="")
    p.add_argument("--reference", default="")
    p.add_argument("--cutoff", type=float, default=0.5)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"holistic-ml: error: {exc}", file=sys.stderr)
        return 1
    except (HolisticMLError, OSError) as exc:
        print(f"holistic-ml: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
