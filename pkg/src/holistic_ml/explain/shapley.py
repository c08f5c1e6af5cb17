"""Exact Shapley attributions for trees and boosted ensembles.

Uses the path-dependent value function: for a coalition ``S`` the row's
branch is followed on features in ``S`` and children are averaged by training
cover on every other feature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from ..data import Frame
from ..errors import ModelError
from ..models import GbmModel, TreeModel, design_matrix
from ..models.tree import CLASSIFICATION, LEAF

MARGIN = "margin"
PROBABILITY = "probability"
RAW = "raw"

MAX_ORACLE_FEATURES = 15


@dataclass(frozen=True)
class Attribution:
    """Additive explanation of one prediction: ``base_value + sum(phi) == output``."""

    phi: Mapping[str, float]
    base_value: float
    output: float
    output_space: str

    def total(self) -> float:
        return self.base_value + math.fsum(self.phi.values())

    def ranked(self) -> list[tuple[str, float]]:
        """Features by decreasing absolute contribution, e.g. for reason codes."""
        names = list(self.phi)
        return sorted(self.phi.items(), key=lambda kv: (-abs(kv[1]), names.index(kv[0])))


# -- fast path -----------------------------------------------------------------

def _leaf_paths(tree: TreeModel):
    """For every leaf: its value and the (node, went_left) steps from the root."""
    out = []
    stack = [(0, [])]
    while stack:
        node, steps = stack.pop()
        if tree.left[node] == LEAF:
            out.append((node, steps))
            continue
        stack.append((int(tree.right[node]), steps + [(node, False)]))
        stack.append((int(tree.left[node]), steps + [(node, True)]))
    return out


def _shapley_weights(d: int) -> np.ndarray:
    """``k! (d-k-1)! / d!`` for ``k = 0 .. d-1``."""
    return np.array([math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d) for k in range(d)])


def tree_shap_values(tree: TreeModel, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Shapley values of one tree for every row of ``x``.

    Returns ``(phi, expected_value)`` with ``phi`` shaped ``n_rows x n_features``.

    Each leaf contributes a product game over the distinct features on its
    path: a feature in the coalition contributes the row's routing indicator,
    any other one the cover fraction of the branch. Shapley values of that
    game come from the coefficients of ``prod_j (z_j + o_j t)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = len(x)
    phi = np.zeros((n, tree.n_features))
    cover = tree.cover
    goes_left = {}
    for node in np.flatnonzero(tree.left != LEAF):
        goes_left[int(node)] = x[:, tree.feature[node]] < tree.threshold[node]

    expected = 0.0
    for leaf, steps in _leaf_paths(tree):
        value = tree.value[leaf]
        expected += value * cover[leaf] / cover[0]
        if not steps or value == 0.0:
            continue
        zero_frac: dict[int, float] = {}
        one_frac: dict[int, np.ndarray] = {}
        for node, went_left in steps:
            f = int(tree.feature[node])
            child = tree.left[node] if went_left else tree.right[node]
            ratio = cover[child] / cover[node]
            follows = goes_left[node] if went_left else ~goes_left[node]
            zero_frac[f] = zero_frac.get(f, 1.0) * ratio
            one_frac[f] = one_frac.get(f, np.ones(n)) * follows
        feats = list(zero_frac)
        d = len(feats)
        weights = _shapley_weights(d)
        for i in feats:
            # coefficients of prod_{j != i} (z_j + o_j t), one row per sample
            poly = np.zeros((n, d))
            poly[:, 0] = 1.0
            deg = 0
            for j in feats:
                if j == i:
                    continue
                shifted = np.zeros_like(poly)
                shifted[:, 1:deg + 2] = poly[:, :deg + 1]
                poly = poly * zero_frac[j] + shifted * one_frac[j][:, None]
                deg += 1
            phi[:, i] += value * (one_frac[i] - zero_frac[i]) * (poly @ weights)
    return phi, expected


def _native_space(model) -> str:
    if isinstance(model, GbmModel):
        return MARGIN
    return PROBABILITY if model.task == CLASSIFICATION else RAW


def shap_matrix(model: TreeModel | GbmModel, x: np.ndarray, space: str | None = None):
    """Vectorised attributions: ``(phi, base_values, outputs, space)`` for a design matrix.

    Boosted models are explained exactly in margin space. ``space="probability"``
    rescales each row's margin attributions by ``(p - p0) / (m - m0)`` so they
    still add up to the predicted probability; that rescaling is a convenience,
    not a Shapley value of the probability game.
    """
    if not isinstance(model, (TreeModel, GbmModel)):
        raise ModelError(f"tree Shapley needs a tree model, got {type(model).__name__}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    native = _native_space(model)
    space = native if space is None else space
    if isinstance(model, TreeModel):
        if not (model.cover > 0).all():
            raise ModelError("tree lacks positive node covers")
        if space not in (native, MARGIN, PROBABILITY, RAW):
            raise ModelError(f"unknown output space {space!r}")
        phi, expected = tree_shap_values(model, x)
        return phi, np.full(len(x), expected), model.predict_raw(x), native
    if space not in (MARGIN, PROBABILITY):
        raise ModelError(f"unknown output space {space!r}")
    phi = np.zeros((len(x), model.n_features))
    expected = 0.0
    for tree in model.trees:
        tphi, texp = tree_shap_values(tree, x)
        phi += tphi
        expected += texp
    phi *= model.learning_rate
    base = model.base_score + model.learning_rate * expected
    margin = model.margin(x)
    if space == MARGIN:
        return phi, np.full(len(x), base), margin, MARGIN
    p0 = float(expit(base))
    prob = expit(margin)
    delta = margin - base
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(delta != 0.0, (prob - p0) / np.where(delta != 0.0, delta, 1.0), p0 * (1.0 - p0))
    return phi * scale[:, None], np.full(len(x), p0), prob, PROBABILITY


def _row_matrix(model, row) -> np.ndarray:
    if isinstance(row, Frame):
        x = design_matrix(model, row)
        if len(x) != 1:
            raise ModelError("expected a single-row frame")
        return x
    if isinstance(row, Mapping):
        try:
            return np.array([[float(row[n]) for n in model.feature_names]])
        except KeyError as exc:
            raise ModelError(f"schema mismatch: row lacks feature {exc.args[0]!r}") from None
    return design_matrix(model, np.asarray(row, dtype=np.float64).reshape(1, -1))


def tree_shap_local(model: TreeModel | GbmModel, row, space: str | None = None) -> Attribution:
    """Attribution for one row (array in model feature order, mapping, or one-row frame)."""
    x = _row_matrix(model, row)
    phi, base, out, space = shap_matrix(model, x, space)
    return Attribution(
        phi=dict(zip(model.feature_names, phi[0].tolist())),
        base_value=float(base[0]),
        output=float(out[0]),
        output_space=space,
    )


def global_importance(model: TreeModel | GbmModel, rows: Frame | np.ndarray, space: str | None = None) -> dict[str, float]:
    """Mean absolute attribution per feature, largest first (ties by feature order)."""
    x = design_matrix(model, rows)
    if len(x) == 0:
        raise ModelError("global importance needs at least one row")
    phi, _, _, _ = shap_matrix(model, x, space)
    mean_abs = np.abs(phi).mean(axis=0)
    order = sorted(range(len(mean_abs)), key=lambda j: (-mean_abs[j], j))
    return {model.feature_names[j]: float(mean_abs[j]) for j in order}


# -- brute-force oracle --------------------------------------------------------

def conditional_expectation(tree: TreeModel, x: np.ndarray, known: frozenset[int]) -> float:
    """Path-dependent expectation of a tree given the features in ``known``."""

    def descend(node: int) -> float:
        if tree.left[node] == LEAF:
            return float(tree.value[node])
        lc, rc = int(tree.left[node]), int(tree.right[node])
        f = int(tree.feature[node])
        if f in known:
            return descend(lc if x[f] < tree.threshold[node] else rc)
        wl, wr = tree.cover[lc], tree.cover[rc]
        return (wl * descend(lc) + wr * descend(rc)) / (wl + wr)

    return descend(0)


def shapley_brute_oracle(model: TreeModel | GbmModel, row, space: str | None = None) -> Attribution:
    """Shapley values by enumerating every coalition; exponential, for testing only.

    Boosted models are explained in margin space.
    """
    x = _row_matrix(model, row)[0]
    m = model.n_features
    if m > MAX_ORACLE_FEATURES:
        raise ModelError(f"oracle supports at most {MAX_ORACLE_FEATURES} features, model has {m}")
    if isinstance(model, GbmModel):
        if space not in (None, MARGIN):
            raise ModelError("the oracle explains boosted models in margin space only")
        trees, scale, offset, label = model.trees, model.learning_rate, model.base_score, MARGIN
    else:
        trees, scale, offset, label = (model,), 1.0, 0.0, _native_space(model)

    value = {}
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            known = frozenset(subset)
            value[known] = offset + scale * math.fsum(conditional_expectation(t, x, known) for t in trees)

    weight = [math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)]
    phi = {}
    for i in range(m):
        others = [j for j in range(m) if j != i]
        terms = []
        for size in range(m):
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                terms.append(weight[size] * (value[s | {i}] - value[s]))
        phi[model.feature_names[i]] = math.fsum(terms)
    full = value[frozenset(range(m))]
    return Attribution(phi=phi, base_value=value[frozenset()], output=full, output_space=label)
