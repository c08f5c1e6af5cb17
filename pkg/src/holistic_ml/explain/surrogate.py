"""Global surrogate trees fitted to another model's predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Frame
from ..errors import ModelError
from ..models import GbmModel, LinearModel, TreeModel, design_matrix, predict_proba, train_regression_tree


@dataclass(frozen=True, eq=False)
class SurrogateFit:
    surrogate: TreeModel
    fidelity_r2: float
    fidelity_rmse: float
    reference: str
    n_train: int
    n_holdout: int


def describe_model(model) -> str:
    if isinstance(model, GbmModel):
        return f"gbm(n_trees={len(model.trees)}, learning_rate={model.learning_rate}, max_depth={model.params.get('max_depth')})"
    if isinstance(model, TreeModel):
        return f"tree(depth={model.depth()}, nodes={model.n_nodes})"
    if isinstance(model, LinearModel):
        return f"linear(n_features={len(model.coefficients)})"
    return type(model).__name__


def fidelity(reference: np.ndarray, approx: np.ndarray) -> tuple[float, float]:
    """(R^2, RMSE) of ``approx`` against ``reference``; R^2 is 0 when the reference is constant."""
    resid = reference - approx
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    sst = float(np.sum((reference - reference.mean()) ** 2))
    if sst <= 0.0:
        return 0.0, rmse
    return 1.0 - float(np.sum(resid ** 2)) / sst, rmse


def fit_surrogate_tree(
    reference,
    rows: Frame,
    depth: int = 3,
    seed: int = 0,
    min_samples_leaf: int = 1,
) -> SurrogateFit:
    """Regression tree mimicking ``reference``'s predicted probabilities.

    The tree is trained on a seeded random half of ``rows``; fidelity is
    measured on the other half.
    """
    if depth < 1:
        raise ModelError("surrogate depth must be at least 1")
    if rows.n_rows < 2:
        raise ModelError("surrogate fitting needs at least two rows")
    x = design_matrix(reference, rows)
    target = predict_proba(reference, rows)
    perm = np.random.default_rng(seed).permutation(len(x))
    half = len(x) // 2
    train_idx, hold_idx = np.sort(perm[:half]), np.sort(perm[half:])
    tree = train_regression_tree(
        x[train_idx], target[train_idx], list(reference.feature_names), max_depth=depth,
        min_samples_leaf=min_samples_leaf,
    )
    r2, rmse = fidelity(target[hold_idx], tree.predict_raw(x[hold_idx]))
    return SurrogateFit(tree, r2, rmse, describe_model(reference), len(train_idx), len(hold_idx))


def tree_rules(tree: TreeModel, precision: int = 4) -> list[str]:
    """Indented text dump, one line per node."""
    lines = []

    def walk(node: int, indent: int, label: str) -> None:
        pad = "  " * indent
        cover = int(tree.cover[node]) if float(tree.cover[node]).is_integer() else tree.cover[node]
        if tree.is_leaf(node):
            lines.append(f"{pad}{label}value={tree.value[node]:.{precision}f} (cover={cover})")
            return
        name = tree.feature_names[tree.feature[node]]
        thr = f"{tree.threshold[node]:.{precision}f}"
        lines.append(f"{pad}{label}split {name} < {thr} (cover={cover})")
        walk(int(tree.left[node]), indent + 1, "yes: ")
        walk(int(tree.right[node]), indent + 1, "no:  ")

    walk(0, 0, "")
    return lines


def top_split_features(tree: TreeModel, levels: int = 2) -> list[tuple[str, float, int]]:
    """``(feature, threshold, depth)`` of every split in the first ``levels`` levels."""
    out = []
    frontier = [(0, 0)]
    while frontier:
        node, d = frontier.pop(0)
        if d >= levels or tree.is_leaf(node):
            continue
        out.append((tree.feature_names[tree.feature[node]], float(tree.threshold[node]), d))
        frontier.append((int(tree.left[node]), d + 1))
        frontier.append((int(tree.right[node]), d + 1))
    return out
