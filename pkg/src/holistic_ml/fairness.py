"""Disparate impact testing and decision-cutoff remediation.

The favorable outcome is a predicted negative (no default). Ratios are always
protected over reference and are computed with exact fractions, so boundary
cases such as an adverse impact ratio of exactly 0.8 are not lost to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .data import Frame, format_level
from .errors import DataError, ModelError
from .models import accuracy, predict_proba

BAND = (Fraction(4, 5), Fraction(5, 4))
METRICS = ("air", "for_disparity")
PASS, FAIL, NOT_EVALUABLE = "pass", "fail", "not-evaluable"


def _levels(values) -> tuple[str, ...]:
    if isinstance(values, (str, int, float, np.integer, np.floating)):
        values = [values]
    return tuple(v if isinstance(v, str) else format_level(float(v)) for v in values)


@dataclass(frozen=True)
class GroupSpec:
    feature: str
    protected: tuple[str, ...]
    reference: tuple[str, ...]
    cutoff: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "protected", _levels(self.protected))
        object.__setattr__(self, "reference", _levels(self.reference))
        if not self.protected or not self.reference:
            raise DataError("protected and reference groups need at least one value each")
        if set(self.protected) & set(self.reference):
            raise DataError("protected and reference values overlap")

    def with_cutoff(self, cutoff: float) -> "GroupSpec":
        return GroupSpec(self.feature, self.protected, self.reference, cutoff)


@dataclass(frozen=True)
class GroupCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def favorable_rate(self) -> Fraction:
        return Fraction(self.tn + self.fn, self.n)

    @property
    def false_omission_rate(self) -> Fraction | None:
        negatives = self.tn + self.fn
        return Fraction(self.fn, negatives) if negatives else None


@dataclass(frozen=True)
class Confusion:
    protected: GroupCounts
    reference: GroupCounts
    excluded: int
    cutoff: float


def confusion_by_group(predictions, labels, frame: Frame, spec: GroupSpec) -> Confusion:
    """Confusion counts for the protected and reference groups; positive = default, predicted iff p >= cutoff."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    if len(p) != frame.n_rows or len(y) != frame.n_rows:
        raise DataError("predictions, labels and frame must have the same number of rows")
    values = np.array(frame.decoded(spec.feature), dtype=object)
    pred = p >= spec.cutoff
    actual = y == 1

    def tally(group: tuple[str, ...], label: str) -> GroupCounts:
        rows = np.isin(values, group)
        if not rows.any():
            raise DataError(f"{label} group {list(group)} of {spec.feature!r} is empty")
        pr, ac = pred[rows], actual[rows]
        return GroupCounts(
            tp=int((pr & ac).sum()), fp=int((pr & ~ac).sum()),
            tn=int((~pr & ~ac).sum()), fn=int((~pr & ac).sum()),
        )

    prot = tally(spec.protected, "protected")
    ref = tally(spec.reference, "reference")
    return Confusion(prot, ref, frame.n_rows - prot.n - ref.n, float(spec.cutoff))


@dataclass(frozen=True, eq=False)
class DisparityReport:
    confusion: Confusion
    exact: Mapping[str, Fraction | None]
    undefined: Mapping[str, str] = field(default_factory=dict)

    @property
    def air(self) -> float | None:
        value = self.exact["air"]
        return None if value is None else float(value)

    @property
    def for_disparity(self) -> float | None:
        value = self.exact["for_disparity"]
        return None if value is None else float(value)

    @property
    def flags(self) -> dict[str, str]:
        return four_fifths_flags(self)


def _ratio(num: Fraction | None, den: Fraction | None, what: str, undefined: dict, key: str) -> Fraction | None:
    if num is None or den is None:
        undefined[key] = f"{what}: a group has no predicted negatives"
        return None
    if den == 0:
        undefined[key] = f"{what}: reference group rate is zero"
        return None
    return num / den


def disparity_metrics(confusion: Confusion) -> DisparityReport:
    undefined: dict[str, str] = {}
    prot, ref = confusion.protected, confusion.reference
    air = _ratio(prot.favorable_rate, ref.favorable_rate, "adverse impact ratio", undefined, "air")
    fordis = _ratio(prot.false_omission_rate, ref.false_omission_rate, "false omissions rate disparity",
                    undefined, "for_disparity")
    return DisparityReport(confusion, {"air": air, "for_disparity": fordis}, undefined)


def four_fifths_flags(report: DisparityReport) -> dict[str, str]:
    """``pass`` inside the closed band [0.8, 1.25], ``fail`` outside, ``not-evaluable`` when undefined."""
    flags = {}
    for name, value in report.exact.items():
        if value is None:
            flags[name] = NOT_EVALUABLE
        else:
            flags[name] = PASS if BAND[0] <= value <= BAND[1] else FAIL
    return flags


def audit(model, frame: Frame, spec: GroupSpec) -> DisparityReport:
    p = predict_proba(model, frame)
    return disparity_metrics(confusion_by_group(p, frame.target, frame, spec))


@dataclass(frozen=True, eq=False)
class Remediation:
    feasible: bool
    original_cutoff: float
    cutoff: float | None
    report: DisparityReport | None
    accuracy_before: float
    accuracy_after: float | None
    reason: str = ""

    @property
    def accuracy_delta(self) -> float | None:
        return None if self.accuracy_after is None else self.accuracy_after - self.accuracy_before


def remediate_cutoff(
    model,
    frame: Frame,
    spec: GroupSpec,
    metrics: Sequence[str] = METRICS,
    step: float = 0.01,
    scores: np.ndarray | None = None,
) -> Remediation:
    """Nearest cutoff, scanning upward then downward in ``step`` increments, whose audit passes ``metrics``.

    ``scores`` may replace the model's predictions (``model`` is then ignored).
    Scores never change with the cutoff, so only accuracy is reported as a cost.
    """
    if not step > 0:
        raise ModelError("step must be positive")
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ModelError(f"unknown metrics {unknown}; choose from {list(METRICS)}")
    p = predict_proba(model, frame) if scores is None else np.asarray(scores, dtype=np.float64)
    y = frame.target
    base_acc = accuracy(p, y, spec.cutoff)

    def passes(cutoff: float) -> DisparityReport | None:
        report = disparity_metrics(confusion_by_group(p, y, frame, spec.with_cutoff(cutoff)))
        flags = four_fifths_flags(report)
        return report if all(flags[m] == PASS for m in metrics) else None

    c0 = float(spec.cutoff)
    candidates = [c0]
    k = 1
    while round(c0 + k * step, 12) <= 1.0:
        candidates.append(round(c0 + k * step, 12))
        k += 1
    k = 1
    while round(c0 - k * step, 12) >= 0.0:
        candidates.append(round(c0 - k * step, 12))
        k += 1
    for cutoff in candidates:
        report = passes(cutoff)
        if report is not None:
            return Remediation(True, c0, cutoff, report, base_acc, accuracy(p, y, cutoff))
    if len(p) and np.ptp(p) == 0:
        reason = "model scores every row identically, so no cutoff separates decisions"
    else:
        reason = f"no cutoff in [0, 1] at step {step} brings {list(metrics)} into [0.8, 1.25]"
    return Remediation(False, c0, None, None, base_acc, None, reason)


def report_to_dict(report: DisparityReport, spec: GroupSpec) -> dict:
    """JSON-ready audit: group counts and rates, metrics, flags and cutoff."""

    def group(counts: GroupCounts, values: tuple[str, ...]) -> dict:
        fo = counts.false_omission_rate
        return {
            "values": list(values),
            "counts": {"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn, "n": counts.n},
            "rates": {
                "favorable_rate": float(counts.favorable_rate),
                "false_omission_rate": None if fo is None else float(fo),
            },
        }

    conf = report.confusion
    return {
        "feature": spec.feature,
        "cutoff": conf.cutoff,
        "groups": {
            "protected": group(conf.protected, spec.protected),
            "reference": group(conf.reference, spec.reference),
        },
        "excluded_rows": conf.excluded,
        "metrics": {"air": report.air, "for_disparity": report.for_disparity},
        "undefined": dict(report.undefined),
        "flags": four_fifths_flags(report),
        "band": [0.8, 1.25],
    }
