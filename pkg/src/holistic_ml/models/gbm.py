"""Gradient boosting on the logistic loss with optional monotone constraints."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from ..data import Frame, Role
from ..errors import ModelError
from .tree import REGRESSION, TreeGrower, TreeModel, _frame_xy


@dataclass(frozen=True, eq=False)
class GbmModel:
    """Boosted ensemble; ``P(y=1) = sigmoid(base_score + learning_rate * sum(tree margins))``."""

    trees: tuple[TreeModel, ...]
    learning_rate: float
    base_score: float
    feature_names: tuple[str, ...]
    monotone: Mapping[str, int] = field(default_factory=dict)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "monotone", {k: int(v) for k, v in self.monotone.items()})
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def margin(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        total = np.zeros(len(x))
        for tree in self.trees:
            total += tree.predict_raw(x)
        return self.base_score + self.learning_rate * total

    def staged_margin(self, x: np.ndarray):
        """Yield the margin after 0, 1, ..., n_trees rounds."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        total = np.zeros(len(x))
        yield self.base_score + self.learning_rate * total
        for tree in self.trees:
            total = total + tree.predict_raw(x)
            yield self.base_score + self.learning_rate * total

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return expit(self.margin(x))


def logistic_loss(margin: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood, computed stably from the margin."""
    margin = np.asarray(margin, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _check_monotone(train: Frame, names: Sequence[str], monotone: Mapping[str, int]) -> dict[int, int]:
    index = {}
    for name, direction in monotone.items():
        if name not in names:
            raise ModelError(f"monotone constraint on unknown feature {name!r}")
        if direction not in (-1, 0, 1):
            raise ModelError(f"monotone direction for {name!r} must be -1, 0 or +1")
        if train.column(name).role is not Role.NUMERIC:
            raise ModelError(f"monotone constraint needs a numeric feature, {name!r} is not")
        if direction:
            index[names.index(name)] = int(direction)
    return index


def train_gbm(
    train: Frame,
    n_rounds: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 4,
    l2: float = 1.0,
    monotone: Mapping[str, int] | None = None,
    min_samples_leaf: int = 1,
    features: Sequence[str] | None = None,
) -> GbmModel:
    """Fit a boosted tree ensemble with Newton leaf values ``-sum(g) / (sum(h) + l2)``.

    ``monotone`` maps feature names to +1 (non-decreasing) or -1
    (non-increasing); the constraint holds exactly for the final model.
    """
    if n_rounds < 1:
        raise ModelError("n_rounds must be at least 1")
    if learning_rate <= 0:
        raise ModelError("learning_rate must be positive")
    if max_depth < 1:
        raise ModelError("max_depth must be at least 1")
    if l2 < 0:
        raise ModelError("l2 must be non-negative")
    x, names = _frame_xy(train, features)
    y = train.target
    prevalence = float(y.mean())
    if prevalence in (0.0, 1.0):
        raise ModelError("target has a single class; boosting needs both")
    constraints = _check_monotone(train, names, monotone or {})

    def newton_value(g_sum, h_sum):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -g_sum / (h_sum + l2)

    grower = TreeGrower(
        x, max_depth=max_depth, min_samples_leaf=min_samples_leaf, l2=l2,
        leaf_value=newton_value, monotone=constraints,
    )
    base_score = float(np.log(prevalence / (1.0 - prevalence)))
    margin = np.full(len(y), base_score)
    raw_sum = np.zeros(len(y))
    trees = []
    for _ in range(n_rounds):
        p = expit(margin)
        grad = p - y
        hess = p * (1.0 - p)
        tree = grower.grow(grad, hess, names, task=REGRESSION, params={"max_depth": max_depth})
        trees.append(tree)
        raw_sum += tree.predict_raw(x)
        margin = base_score + learning_rate * raw_sum

    params = {
        "n_rounds": n_rounds,
        "learning_rate": learning_rate,
        "max_depth": max_depth,
        "l2": l2,
        "min_samples_leaf": min_samples_leaf,
    }
    return GbmModel(
        trees=tuple(trees),
        learning_rate=float(learning_rate),
        base_score=base_score,
        feature_names=tuple(names),
        monotone={names[j]: d for j, d in sorted(constraints.items())},
        params=params,
    )


def monotone_from_correlation(frame: Frame, features: Sequence[str]) -> dict[str, int]:
    """Constraint directions from the sign of each feature's Pearson correlation with the target."""
    y = frame.target
    out = {}
    for name in features:
        x = frame.numeric_values(name)
        if np.std(x) == 0 or np.std(y) == 0:
            out[name] = 0
            continue
        out[name] = int(np.sign(np.corrcoef(x, y)[0, 1]))
    return out
