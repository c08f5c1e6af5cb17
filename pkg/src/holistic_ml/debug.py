"""Residual analysis and what-if probes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import Frame, Role, format_level
from .errors import DataError, ModelError
from .models import GbmModel, TreeModel, design_matrix, predict_proba

EPS = 1e-15


def deviance_residuals(predictions, labels) -> np.ndarray:
    """Signed square root of each row's logistic deviance; exactly 0 when p equals y."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise DataError(f"length mismatch: {p.size} predictions, {y.size} labels")
    # probability given to the observed label, clamped only from below so p and 1 - p are treated alike
    q = np.maximum(np.where(y == 1, p, 1.0 - p), EPS)
    r = np.sign(y - p) * np.sqrt(np.maximum(-2.0 * np.log(q), 0.0))
    return np.where(p == y, 0.0, r)


@dataclass(frozen=True)
class GroupSummary:
    value: str
    count: int
    mean: float
    mean_abs: float
    min: float
    max: float


@dataclass(frozen=True, eq=False)
class ResidualReport:
    predictions: np.ndarray
    labels: np.ndarray
    residuals: np.ndarray
    group_feature: str | None
    group_values: list[str]
    groups: list[GroupSummary]


def _summary(value: str, r: np.ndarray) -> GroupSummary:
    return GroupSummary(value, int(len(r)), float(r.mean()), float(np.abs(r).mean()), float(r.min()), float(r.max()))


def residuals_by_group(model, rows: Frame, group_feature: str | None = None) -> ResidualReport:
    """Deviance residuals of ``model`` on labelled ``rows``, summarised per raw value of ``group_feature``."""
    p = predict_proba(model, rows)
    y = rows.target
    r = deviance_residuals(p, y)
    if group_feature is None:
        groups = [_summary("all", r)] if len(r) else []
        return ResidualReport(p, y, r, None, ["all"] * len(r), groups)

    col = rows.column(group_feature)
    labels = rows.decoded(group_feature)
    try:
        keys = rows.numeric_values(group_feature)
    except DataError:
        keys = None
    if keys is not None:
        order = np.unique(keys)
        groups = [_summary(format_level(v), r[keys == v]) for v in order]
    else:
        codes = rows.values(group_feature)
        groups = [_summary(col.levels[c], r[codes == c]) for c in np.unique(codes)]
    return ResidualReport(p, y, r, group_feature, labels, groups)


def _edited_row(model, row, edits: Mapping[str, object]) -> tuple[np.ndarray, np.ndarray]:
    names = list(model.feature_names)
    if isinstance(row, Frame):
        if row.n_rows != 1:
            raise ModelError("what-if needs a single row")
        before = design_matrix(model, row)[0]
        after = before.copy()
        for name, value in edits.items():
            if name not in names:
                raise ModelError(f"unknown feature {name!r}")
            col = row.column(name)
            if col.role is Role.CATEGORICAL:
                text = value if isinstance(value, str) else format_level(float(value))
                if text not in col.levels:
                    raise DataError(f"{text!r} is not a level of {name!r}")
                after[names.index(name)] = _as_float(name, text)
            else:
                after[names.index(name)] = _as_float(name, value)
        return before, after
    if isinstance(row, Mapping):
        try:
            before = np.array([_as_float(n, row[n]) for n in names])
        except KeyError as exc:
            raise ModelError(f"schema mismatch: row lacks feature {exc.args[0]!r}") from None
    else:
        before = design_matrix(model, row)[0].copy()
    after = before.copy()
    for name, value in edits.items():
        if name not in names:
            raise ModelError(f"unknown feature {name!r}")
        after[names.index(name)] = _as_float(name, value)
    return before, after


def _as_float(name: str, value) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"value {value!r} for {name!r} is not numeric") from None
    if not np.isfinite(out):
        raise DataError(f"value for {name!r} must be finite")
    return out


@dataclass(frozen=True, eq=False)
class WhatIf:
    old_output: float
    new_output: float
    delta: float
    before: Mapping[str, float]
    after: Mapping[str, float]
    old_attribution: object = None
    new_attribution: object = None


def what_if(model, row, edits: Mapping[str, object], explain: bool = False) -> WhatIf:
    """Score ``row`` before and after ``edits``; optionally re-explain both with tree Shapley."""
    before, after = _edited_row(model, row, edits)
    old, new = predict_proba(model, np.vstack([before, after]))
    names = list(model.feature_names)
    old_attr = new_attr = None
    if explain:
        if not isinstance(model, (TreeModel, GbmModel)):
            raise ModelError("re-explanation needs a tree model")
        from .explain.shapley import tree_shap_local

        old_attr = tree_shap_local(model, before)
        new_attr = tree_shap_local(model, after)
    return WhatIf(float(old), float(new), float(new - old), dict(zip(names, before.tolist())),
                  dict(zip(names, after.tolist())), old_attr, new_attr)
