"""Ranking and classification metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from ..errors import ModelError


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties count one half)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise ModelError("scores and labels differ in length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != len(labels):
        raise ModelError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ModelError("AUC needs both classes among the labels")
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(scores: np.ndarray, labels: np.ndarray, cutoff: float = 0.5) -> float:
    """Share of rows where ``score >= cutoff`` agrees with the label."""
    predicted = np.asarray(scores) >= cutoff
    return float(np.mean(predicted == (np.asarray(labels) == 1)))
