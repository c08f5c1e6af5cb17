import json
import math

import numpy as np
import pytest
from scipy.special import expit

from conftest import make_frame, uci_or_skip
from holistic_ml.data import SyntheticConfig, generate_synthetic, split
from holistic_ml.errors import ModelError, ModelFormatError, SingularDesignError
from holistic_ml.explain import pdp_ice
from holistic_ml.models import (
    GbmModel,
    TreeModel,
    accuracy,
    auc,
    constant_tree,
    fit_linear_weighted,
    load_model,
    logistic_loss,
    predict_proba,
    save_model,
    stump,
    train_gbm,
    train_regression_tree,
    train_tree,
)
from holistic_ml.models.tree import LEAF

# 20-row split fixture; the exhaustive scan puts the root at a < 4.5 with child impurity 1.8.
SPLIT_X = np.array([
    [3, 1, 7], [1, 4, 2], [4, 1, 8], [1, 5, 3], [5, 9, 2], [9, 2, 6], [2, 6, 5], [6, 5, 3], [5, 3, 5], [3, 5, 8],
    [8, 9, 7], [9, 7, 9], [7, 9, 3], [2, 3, 2], [3, 8, 4], [8, 4, 6], [4, 6, 2], [6, 2, 6], [2, 6, 4], [6, 4, 3],
], dtype=float)
SPLIT_Y = np.array([0, 0, 0, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 0, 1, 0, 1], dtype=float)
ROOT_FEATURE, ROOT_THRESHOLD, ROOT_CHILD_IMPURITY = 0, 4.5, 1.8


def gini(y):
    if len(y) == 0:
        return 0.0
    p = y.mean()
    return len(y) * 2 * p * (1 - p)


def exhaustive_best_split(x, y):
    best = None
    for j in range(x.shape[1]):
        values = np.unique(x[:, j])
        for t in (values[:-1] + values[1:]) / 2:
            left = x[:, j] < t
            score = gini(y[left]) + gini(y[~left])
            if best is None or score < best[0] - 1e-12:
                best = (score, j, t)
    return best


def split_frame():
    return make_frame(target="y", a=SPLIT_X[:, 0], b=SPLIT_X[:, 1], c=SPLIT_X[:, 2], y=SPLIT_Y)


# -- trees -------------------------------------------------------------------------

def test_root_split_matches_frozen_oracle():
    score, j, t = exhaustive_best_split(SPLIT_X, SPLIT_Y)
    assert (j, t) == (ROOT_FEATURE, ROOT_THRESHOLD)
    assert score == pytest.approx(ROOT_CHILD_IMPURITY, abs=1e-12)
    tree = train_tree(split_frame(), max_depth=3)
    assert (tree.feature[0], tree.threshold[0]) == (ROOT_FEATURE, ROOT_THRESHOLD)


def test_every_split_matches_exhaustive_scan():
    tree = train_tree(split_frame(), max_depth=4)
    leaf_of = tree.apply(SPLIT_X)
    for node in range(tree.n_nodes):
        if tree.is_leaf(node):
            continue
        rows = np.array([node in path for path in _paths(tree, SPLIT_X)])
        _, j, t = exhaustive_best_split(SPLIT_X[rows], SPLIT_Y[rows])
        assert (tree.feature[node], tree.threshold[node]) == (j, t)
    for leaf in np.unique(leaf_of):
        assert tree.value[leaf] == pytest.approx(SPLIT_Y[leaf_of == leaf].mean())


def _paths(tree, x):
    out = []
    for row in x:
        node, path = 0, []
        while True:
            path.append(node)
            if tree.is_leaf(node):
                break
            node = tree.left[node] if row[tree.feature[node]] < tree.threshold[node] else tree.right[node]
        out.append(set(path))
    return out


def test_separable_data_gives_depth_one_perfect_tree():
    x = np.linspace(-1, 1, 40)
    frame = make_frame(target="y", x=x, y=(x >= 0).astype(float))
    tree = train_tree(frame, max_depth=3)
    assert tree.depth() == 1
    assert accuracy(predict_proba(tree, frame), frame.target) == 1.0


def test_tree_structure_invariants():
    frame = generate_synthetic(SyntheticConfig(500, seed=2))
    tree = train_tree(frame, max_depth=5)
    tree.check_structure()
    internal = tree.left != LEAF
    assert np.allclose(tree.cover[internal], tree.cover[tree.left[internal]] + tree.cover[tree.right[internal]])
    assert (tree.cover > 0).all()
    leaves = ~internal
    assert ((tree.value[leaves] >= 0) & (tree.value[leaves] <= 1)).all()


def test_constant_features_give_single_leaf():
    frame = make_frame(target="y", a=[1.0] * 6, y=[0, 1, 1, 0, 1, 1])
    tree = train_tree(frame)
    assert tree.n_nodes == 1
    assert tree.value[0] == pytest.approx(4 / 6)


def test_tree_errors():
    with pytest.raises(ModelError):
        train_tree(make_frame(target="y", a=[], y=[]))
    with pytest.raises(ModelError):
        train_tree(split_frame(), max_depth=0)


def test_min_samples_leaf_is_respected():
    tree = train_tree(split_frame(), max_depth=6, min_samples_leaf=4)
    assert tree.cover[tree.left == LEAF].min() >= 4


def test_predict_proba_examples():
    names = ["a"]
    assert predict_proba(constant_tree(0.3, 5, names), np.zeros((4, 1))).tolist() == [0.3] * 4
    tree = stump(0, 0.5, 0.2, 0.9, 3, 3, names)
    assert predict_proba(tree, np.array([[0.4], [0.5], [0.6]])).tolist() == [0.2, 0.9, 0.9]
    empty = GbmModel((), 0.1, 0.7, names)
    assert predict_proba(empty, np.zeros((3, 1))) == pytest.approx([expit(0.7)] * 3)


def test_schema_mismatch():
    tree = train_tree(split_frame(), max_depth=2)
    with pytest.raises(ModelError, match="schema"):
        predict_proba(tree, make_frame(a=[1.0], b=[2.0]))
    with pytest.raises(ModelError, match="schema"):
        predict_proba(tree, np.zeros((2, 5)))


def test_regression_tree_reduces_variance():
    x = np.linspace(0, 1, 50)[:, None]
    y = np.where(x[:, 0] < 0.3, 1.0, 4.0)
    tree = train_regression_tree(x, y, ["x"], max_depth=1)
    assert tree.predict_raw(x) == pytest.approx(y)


# -- boosting ----------------------------------------------------------------------

def test_gbm_beats_majority_baseline(synthetic):
    _, _, valid, model = synthetic
    y = valid.target
    baseline = max(y.mean(), 1 - y.mean())
    assert accuracy(predict_proba(model, valid), y) > baseline


def test_gbm_loss_non_increasing():
    frame = generate_synthetic(SyntheticConfig(800, seed=4))
    model = train_gbm(frame, n_rounds=30)
    x, y = frame.matrix(model.feature_names), frame.target
    losses = [logistic_loss(m, y) for m in model.staged_margin(x)]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gbm_base_score_and_probability_range():
    frame = generate_synthetic(SyntheticConfig(300, seed=9))
    model = train_gbm(frame, n_rounds=5)
    prevalence = frame.target.mean()
    assert model.base_score == pytest.approx(math.log(prevalence / (1 - prevalence)))
    p = predict_proba(model, frame)
    assert ((p > 0) & (p < 1)).all()


def test_gbm_first_tree_leaves_are_newton_steps():
    frame = make_frame(target="y", x=[0, 0, 1, 1], y=[0, 1, 1, 1])
    model = train_gbm(frame, n_rounds=1, max_depth=1, l2=1.0, learning_rate=1.0)
    p0 = 0.75
    left = -((p0 - 0) + (p0 - 1)) / (2 * p0 * (1 - p0) + 1.0)
    right = -(2 * (p0 - 1)) / (2 * p0 * (1 - p0) + 1.0)
    tree = model.trees[0]
    assert tree.predict_raw(np.array([[0.0], [1.0]])) == pytest.approx([left, right], abs=1e-12)


def test_gbm_errors():
    frame = make_frame(target="y", x=[0, 1, 2], y=[1, 1, 1])
    with pytest.raises(ModelError, match="class"):
        train_gbm(frame)
    good = make_frame(target="y", x=[0, 1, 2], y=[0, 1, 1])
    with pytest.raises(ModelError):
        train_gbm(good, n_rounds=0)
    with pytest.raises(ModelError):
        train_gbm(good, monotone={"nope": 1})
    cat = make_frame(target="y", categorical={"c": ["1", "2"]}, c=["1", "2", "1"], y=[0, 1, 1])
    with pytest.raises(ModelError):
        train_gbm(cat, monotone={"c": 1})


def test_monotone_constraint_on_noisy_data():
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(600, 2))
    p = expit(1.5 * x[:, 0] + np.sin(3 * x[:, 0]) + x[:, 1])
    y = (rng.random(600) < p).astype(float)
    frame = make_frame(target="y", a=x[:, 0], b=x[:, 1], y=y)
    model = train_gbm(frame, n_rounds=40, monotone={"a": 1, "b": -1})
    for feature, direction in (("a", 1), ("b", -1)):
        curves = pdp_ice(model, frame, feature, grid_size=50, space="margin")
        steps = np.diff(curves.ice, axis=1) * direction
        assert (steps >= 0).all()


# -- linear ------------------------------------------------------------------------

def test_exact_linear_recovery():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 3))
    y = 0.5 + x @ np.array([1.0, -2.0, 3.0])
    model = fit_linear_weighted(x, y)
    assert list(model.coefficients.values()) == pytest.approx([1.0, -2.0, 3.0], abs=1e-10)
    assert model.intercept == pytest.approx(0.5, abs=1e-10)
    assert model.r_squared == pytest.approx(1.0)


def test_three_point_weighted_fixture():
    # Solved by hand: weighted means x=1, y=9/4; Sxy=3, Sxx=2.
    model = fit_linear_weighted(np.array([[0.0], [1.0], [2.0]]), np.array([1.0, 2.0, 4.0]),
                                np.array([1.0, 2.0, 1.0]))
    assert model.coefficients["x0"] == pytest.approx(1.5, abs=1e-10)
    assert model.intercept == pytest.approx(0.75, abs=1e-10)
    assert model.r_squared == pytest.approx(18 / 19, abs=1e-10)


def test_single_weighted_row_gives_zero_r2():
    x = np.array([[0.0], [1.0], [2.0]])
    model = fit_linear_weighted(x, np.array([1.0, 5.0, 9.0]), np.array([0.0, 1.0, 0.0]), l2=0.1)
    assert model.r_squared == 0.0
    assert model.intercept == pytest.approx(5.0)
    assert model.coefficients["x0"] == 0.0


def test_top_k_keeps_largest_standardised_coefficients():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(200, 4)) * np.array([1.0, 10.0, 1.0, 1.0])
    y = 3 * x[:, 0] + 0.1 * x[:, 1] + 0.5 * x[:, 2] + 0.01 * rng.normal(size=200)
    model = fit_linear_weighted(x, y, top_k=2, feature_names=list("abcd"))
    assert list(model.coefficients) == ["a", "b"]


def test_singular_design_without_ridge():
    x = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(SingularDesignError):
        fit_linear_weighted(x, np.arange(5.0))
    model = fit_linear_weighted(x, np.arange(5.0), l2=1e-6)
    assert model.r_squared == pytest.approx(1.0, abs=1e-6)


def test_linear_input_errors():
    with pytest.raises(ModelError):
        fit_linear_weighted(np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(ModelError):
        fit_linear_weighted(np.zeros((2, 1)), np.zeros(2), np.zeros(2))
    with pytest.raises(ModelError):
        fit_linear_weighted(np.zeros((2, 1)), np.zeros(2), np.array([1.0, -1.0]))


# -- metrics -----------------------------------------------------------------------

def test_auc_tie_fixture():
    # Pairs (positive, negative): 0.4 vs 0.1 -> 1, 0.4 vs 0.4 -> 1/2, 0.8 vs both -> 2; total 3.5 / 4.
    assert auc(np.array([0.1, 0.4, 0.4, 0.8]), np.array([0, 0, 1, 1])) == 0.875


def test_auc_perfect_and_null():
    assert auc(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1])) == 1.0
    rng = np.random.default_rng(3)
    assert abs(auc(rng.random(20000), rng.integers(0, 2, 20000)) - 0.5) < 0.05
    with pytest.raises(ModelError):
        auc(np.array([0.1, 0.2]), np.array([1, 1]))


# -- persistence -------------------------------------------------------------------

def test_gbm_round_trip_bit_exact(tmp_path, synthetic):
    _, _, valid, model = synthetic
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    rows = valid.take(np.arange(100))
    assert np.array_equal(predict_proba(model, rows), predict_proba(back, rows))
    for a, b in zip(model.trees, back.trees):
        assert np.array_equal(a.cover, b.cover)


def test_tree_and_linear_round_trip(tmp_path):
    tree = train_tree(split_frame(), max_depth=3)
    save_model(tree, tmp_path / "t.json")
    back = load_model(tmp_path / "t.json")
    assert isinstance(back, TreeModel)
    assert np.array_equal(back.predict_raw(SPLIT_X), tree.predict_raw(SPLIT_X))
    lin = fit_linear_weighted(SPLIT_X, SPLIT_Y, feature_names=["a", "b", "c"])
    save_model(lin, tmp_path / "l.json")
    assert load_model(tmp_path / "l.json").predict(SPLIT_X).tolist() == lin.predict(SPLIT_X).tolist()


def test_malformed_model_files(tmp_path, synthetic):
    path = tmp_path / "m.json"
    save_model(synthetic[3], path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)
    doc = json.loads(text)
    doc["format_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)
    del doc["format_version"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError):
        load_model(path)


@pytest.mark.uci
def test_uci_tree_auc_example():
    from holistic_ml.data import UCI_FEATURES, load_uci

    frame = load_uci(uci_or_skip())
    train, valid = split(frame, 0.3, seed=12345)
    best = max(auc(predict_proba(train_tree(train, d, features=UCI_FEATURES), valid), valid.target)
               for d in (3, 4, 5, 6))
    assert 0.71 <= best <= 0.77
