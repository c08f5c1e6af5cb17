"""Binary split trees and the exact greedy grower shared by CART, regression trees and boosting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..data import Frame, Role
from ..errors import ModelError

CLASSIFICATION = "classification"
REGRESSION = "regression"

LEAF = -1


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Array-encoded binary tree; node 0 is the root.

    A row goes left at node ``k`` when ``x[feature[k]] < threshold[k]``.
    Leaves have ``left == right == feature == -1``. ``cover`` is the number of
    training rows that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    feature_names: tuple[str, ...]
    task: str = CLASSIFICATION
    max_depth: int = 0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("feature", "left", "right"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("threshold", "value", "cover"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == LEAF

    def depth(self) -> int:
        """Realised depth (a single leaf has depth 0)."""
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if not self.is_leaf(node):
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        node = np.zeros(len(x), dtype=np.int64)
        active = np.flatnonzero(self.left[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = x[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.left[node[active]] != LEAF]
        return node

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature[self.left != LEAF]}

    def check_structure(self) -> None:
        """Raise if the node arrays do not describe a single rooted tree with consistent covers."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            node = stack.pop()
            if seen[node]:
                raise ModelError(f"node {node} reached twice")
            seen[node] = True
            if self.cover[node] <= 0:
                raise ModelError(f"node {node} has non-positive cover")
            lc, rc = int(self.left[node]), int(self.right[node])
            if (lc == LEAF) != (rc == LEAF):
                raise ModelError(f"node {node} has exactly one child")
            if lc != LEAF:
                if not (0 <= lc < n and 0 <= rc < n):
                    raise ModelError(f"node {node} has out-of-range children")
                if not 0 <= self.feature[node] < self.n_features:
                    raise ModelError(f"node {node} splits on unknown feature index")
                if not np.isclose(self.cover[node], self.cover[lc] + self.cover[rc], rtol=1e-12, atol=0):
                    raise ModelError(f"cover of node {node} differs from the sum of its children")
                stack.extend((lc, rc))
        if not seen.all():
            raise ModelError("tree has unreachable nodes")


def stump(feature: int, threshold: float, left_value: float, right_value: float,
          left_cover: float, right_cover: float, feature_names: Sequence[str],
          task: str = CLASSIFICATION) -> TreeModel:
    """Depth-one tree; convenient for fixtures."""
    return TreeModel(
        feature=[feature, LEAF, LEAF],
        threshold=[threshold, 0.0, 0.0],
        left=[1, LEAF, LEAF],
        right=[2, LEAF, LEAF],
        value=[(left_cover * left_value + right_cover * right_value) / (left_cover + right_cover),
               left_value, right_value],
        cover=[left_cover + right_cover, left_cover, right_cover],
        feature_names=feature_names,
        task=task,
        max_depth=1,
    )


def constant_tree(value: float, cover: float, feature_names: Sequence[str],
                  task: str = CLASSIFICATION) -> TreeModel:
    return TreeModel([LEAF], [0.0], [LEAF], [LEAF], [value], [cover], feature_names, task, 0)


# -- greedy growth ------------------------------------------------------------

@dataclass
class _Split:
    feature: int
    threshold: float
    gain: float
    left_value: float
    right_value: float


class TreeGrower:
    """Exact greedy grower maximising ``S_L^2/(W_L+l2) + S_R^2/(W_R+l2)``.

    Every supported criterion reduces to that score: with ``stat = y`` and unit
    weights it ranks splits exactly as Gini impurity decrease (binary targets)
    and as variance reduction; with gradients and hessians it is the
    second-order boosting gain. ``leaf_value(S, W)`` turns node sums into the
    node's prediction. Ties go to the lowest feature index, then the lowest
    threshold.

    ``monotone`` maps feature index to +1/-1. On those features a split is
    rejected when its children's (bounded) values run against the direction,
    and children inherit ``[lower, upper]`` bounds cut at the midpoint of the
    two child values. All leaf values are clipped to their node's bounds.
    """

    def __init__(
        self,
        x: np.ndarray,
        *,
        max_depth: int,
        min_samples_leaf: int = 1,
        l2: float = 0.0,
        leaf_value: Callable[[np.ndarray, np.ndarray], np.ndarray],
        monotone: Mapping[int, int] | None = None,
    ):
        if max_depth < 0:
            raise ModelError("max_depth must be non-negative")
        if min_samples_leaf < 1:
            raise ModelError("min_samples_leaf must be at least 1")
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.l2 = float(l2)
        self.leaf_value = leaf_value
        self.monotone = {int(k): int(v) for k, v in (monotone or {}).items() if v}
        n, p = self.x.shape
        self.order = [np.argsort(self.x[:, j], kind="stable") for j in range(p)]
        self._in_node = np.zeros(n, dtype=bool)

    def grow(self, stat: np.ndarray, weight: np.ndarray, feature_names: Sequence[str],
             task: str = REGRESSION, params: Mapping[str, float] | None = None) -> TreeModel:
        self.stat = np.asarray(stat, dtype=np.float64)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.nodes: list[list] = []
        all_rows = np.arange(len(self.x))
        self._grow_node(all_rows, 0, -np.inf, np.inf)
        cols = list(zip(*self.nodes))
        return TreeModel(
            feature=cols[0], threshold=cols[1], left=cols[2], right=cols[3],
            value=cols[4], cover=cols[5], feature_names=feature_names, task=task,
            max_depth=self.max_depth, params=params or {},
        )

    def _node_value(self, s: float, w: float, lo: float, hi: float) -> float:
        raw = float(self.leaf_value(np.array([s]), np.array([w]))[0])
        return min(max(raw, lo), hi)

    def _grow_node(self, rows: np.ndarray, depth: int, lo: float, hi: float) -> int:
        s = float(self.stat[rows].sum())
        w = float(self.weight[rows].sum())
        node_id = len(self.nodes)
        value = self._node_value(s, w, lo, hi)
        self.nodes.append([LEAF, 0.0, LEAF, LEAF, value, float(len(rows))])
        if depth >= self.max_depth or len(rows) < 2 * self.min_samples_leaf:
            return node_id
        best = self._best_split(rows, s, w, value, lo, hi)
        if best is None:
            return node_id
        go_left = self.x[rows, best.feature] < best.threshold
        left_lo, left_hi, right_lo, right_hi = lo, hi, lo, hi
        direction = self.monotone.get(best.feature, 0)
        if direction:
            mid = 0.5 * (best.left_value + best.right_value)
            if direction > 0:
                left_hi, right_lo = mid, mid
            else:
                left_lo, right_hi = mid, mid
        left_id = self._grow_node(rows[go_left], depth + 1, left_lo, left_hi)
        right_id = self._grow_node(rows[~go_left], depth + 1, right_lo, right_hi)
        self.nodes[node_id][:4] = [best.feature, best.threshold, left_id, right_id]
        return node_id

    def _sorted_rows(self, rows: np.ndarray, j: int) -> np.ndarray:
        n = len(self.x)
        if len(rows) * 16 < n:
            return rows[np.argsort(self.x[rows, j], kind="stable")]
        self._in_node[rows] = True
        ordered = self.order[j][self._in_node[self.order[j]]]
        self._in_node[rows] = False
        return ordered

    def _best_split(self, rows, s_tot, w_tot, parent_value, lo, hi) -> _Split | None:
        m = len(rows)
        msl = self.min_samples_leaf
        l2 = self.l2
        constrained = bool(self.monotone)
        counts = np.arange(1, m)
        size_ok = (counts >= msl) & (m - counts >= msl)
        if constrained:
            parent_score = -(2.0 * s_tot * parent_value + (w_tot + l2) * parent_value ** 2)
        else:
            parent_score = s_tot ** 2 / (w_tot + l2) if w_tot + l2 > 0 else 0.0
        tol = 1e-12 * max(1.0, abs(parent_score))

        per_feature = []
        for j in range(self.x.shape[1]):
            ordered = self._sorted_rows(rows, j)
            xs = self.x[ordered, j]
            valid = size_ok & (xs[:-1] < xs[1:])
            if not valid.any():
                per_feature.append(None)
                continue
            sl = np.cumsum(self.stat[ordered])[:-1]
            wl = np.cumsum(self.weight[ordered])[:-1]
            sr = s_tot - sl
            wr = w_tot - wl
            with np.errstate(divide="ignore", invalid="ignore"):
                if constrained:
                    vl = np.clip(self.leaf_value(sl, wl), lo, hi)
                    vr = np.clip(self.leaf_value(sr, wr), lo, hi)
                    gain = (-(2.0 * sl * vl + (wl + l2) * vl ** 2)
                            - (2.0 * sr * vr + (wr + l2) * vr ** 2) - parent_score)
                    direction = self.monotone.get(j, 0)
                    if direction:
                        valid &= direction * (vr - vl) >= 0
                else:
                    vl = vr = None
                    gain = sl ** 2 / (wl + l2) + sr ** 2 / (wr + l2) - parent_score
            valid &= np.isfinite(gain)
            if not valid.any():
                per_feature.append(None)
                continue
            gain = np.where(valid, gain, -np.inf)
            per_feature.append((ordered, xs, gain, vl, vr, sl, wl, sr, wr))

        best_gain = max((g[2].max() for g in per_feature if g is not None), default=-np.inf)
        if not best_gain > tol:
            return None
        for j, entry in enumerate(per_feature):
            if entry is None or entry[2].max() < best_gain - tol:
                continue
            ordered, xs, gain, vl, vr, sl, wl, sr, wr = entry
            i = int(np.flatnonzero(gain >= best_gain - tol)[0])
            a, b = xs[i], xs[i + 1]
            threshold = a + (b - a) / 2.0
            if not a < threshold <= b:
                threshold = b
            if vl is None:
                left_value = self._node_value(sl[i], wl[i], lo, hi)
                right_value = self._node_value(sr[i], wr[i], lo, hi)
            else:
                left_value, right_value = float(vl[i]), float(vr[i])
            return _Split(j, float(threshold), float(gain[i]), left_value, right_value)
        return None


def _mean_value(s: np.ndarray, w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(w > 0, s / np.where(w > 0, w, 1.0), 0.0)


def _frame_xy(frame: Frame, features: Sequence[str] | None) -> tuple[np.ndarray, list[str]]:
    if frame.n_rows == 0:
        raise ModelError("cannot train on an empty frame")
    names = list(frame.feature_names if features is None else features)
    for name in names:
        if frame.column(name).role is Role.TARGET:
            raise ModelError(f"target {name!r} cannot be used as a feature")
    return frame.matrix(names), names


def train_tree(
    train: Frame,
    max_depth: int = 4,
    min_samples_leaf: int = 1,
    features: Sequence[str] | None = None,
) -> TreeModel:
    """Fit a Gini-impurity classification tree whose leaves hold positive-class fractions."""
    if max_depth < 1:
        raise ModelError("max_depth must be at least 1")
    x, names = _frame_xy(train, features)
    y = train.target
    grower = TreeGrower(x, max_depth=max_depth, min_samples_leaf=min_samples_leaf, leaf_value=_mean_value)
    params = {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf}
    return grower.grow(y, np.ones_like(y), names, task=CLASSIFICATION, params=params)


def train_regression_tree(
    x: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    max_depth: int,
    min_samples_leaf: int = 1,
) -> TreeModel:
    """Variance-reduction regression tree on a plain design matrix."""
    if max_depth < 1:
        raise ModelError("max_depth must be at least 1")
    if len(x) == 0:
        raise ModelError("cannot train on zero rows")
    grower = TreeGrower(x, max_depth=max_depth, min_samples_leaf=min_samples_leaf, leaf_value=_mean_value)
    y = np.asarray(y, dtype=np.float64)
    params = {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf}
    return grower.grow(y, np.ones_like(y), feature_names, task=REGRESSION, params=params)


def gini_impurity(y: np.ndarray) -> float:
    """Size-weighted Gini impurity ``n * 2p(1-p)`` of a 0/1 vector."""
    n = len(y)
    if n == 0:
        return 0.0
    p = float(np.mean(y))
    return n * 2.0 * p * (1.0 - p)
