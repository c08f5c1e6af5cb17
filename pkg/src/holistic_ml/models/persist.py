"""JSON persistence for trees, boosted ensembles and linear models."""

from __future__ import annotations

import json
import os
from typing import Union

from ..errors import ModelFormatError
from .gbm import GbmModel
from .linear import LinearModel
from .tree import TreeModel

FORMAT_VERSION = 1

Model = Union[TreeModel, GbmModel, LinearModel]


def _tree_doc(tree: TreeModel) -> dict:
    nodes = []
    for k in range(tree.n_nodes):
        nodes.append({
            "feature": int(tree.feature[k]),
            "threshold": float(tree.threshold[k]),
            "left": int(tree.left[k]),
            "right": int(tree.right[k]),
            "value": float(tree.value[k]),
            "cover": float(tree.cover[k]),
        })
    return {"max_depth": tree.max_depth, "nodes": nodes}


def model_to_dict(model: Model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "linear",
            "task": "regression",
            "coefficients": dict(model.coefficients),
            "intercept": model.intercept,
            "r_squared": model.r_squared,
            "n_fit": model.n_fit,
            "l2": model.l2,
            "weighted_mean": model.weighted_mean,
            "params": dict(model.params),
        }
    if isinstance(model, GbmModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gbm",
            "task": "classification",
            "base_score": model.base_score,
            "learning_rate": model.learning_rate,
            "monotone": dict(model.monotone),
            "feature_names": list(model.feature_names),
            "params": dict(model.params),
            "trees": [_tree_doc(t) for t in model.trees],
        }
    if isinstance(model, TreeModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "tree",
            "task": model.task,
            "base_score": 0.0,
            "learning_rate": 1.0,
            "monotone": {},
            "feature_names": list(model.feature_names),
            "params": dict(model.params),
            "trees": [_tree_doc(model)],
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def _tree_from_doc(doc: dict, feature_names, task: str, params=None) -> TreeModel:
    nodes = doc["nodes"]
    if not nodes:
        raise ModelFormatError("tree has no nodes")
    cols = {key: [node[key] for node in nodes] for key in ("feature", "threshold", "left", "right", "value", "cover")}
    tree = TreeModel(
        feature=cols["feature"], threshold=cols["threshold"], left=cols["left"], right=cols["right"],
        value=cols["value"], cover=cols["cover"], feature_names=feature_names, task=task,
        max_depth=int(doc.get("max_depth", 0)), params=params or {},
    )
    try:
        tree.check_structure()
    except Exception as exc:
        raise ModelFormatError(f"invalid tree: {exc}") from None
    return tree


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFormatError("not a model document: format_version missing")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {doc['format_version']!r} (expected {FORMAT_VERSION})"
        )
    try:
        kind = doc["kind"]
        if kind == "linear":
            return LinearModel(
                coefficients=doc["coefficients"],
                intercept=float(doc["intercept"]),
                r_squared=float(doc["r_squared"]),
                n_fit=int(doc["n_fit"]),
                l2=float(doc.get("l2", 0.0)),
                weighted_mean=float(doc.get("weighted_mean", 0.0)),
                params=doc.get("params", {}),
            )
        names = tuple(doc["feature_names"])
        if kind == "tree":
            if len(doc["trees"]) != 1:
                raise ModelFormatError("a tree document holds exactly one tree")
            return _tree_from_doc(doc["trees"][0], names, doc["task"], doc.get("params"))
        if kind == "gbm":
            trees = tuple(_tree_from_doc(t, names, "regression") for t in doc["trees"])
            return GbmModel(
                trees=trees,
                learning_rate=float(doc["learning_rate"]),
                base_score=float(doc["base_score"]),
                feature_names=names,
                monotone=doc.get("monotone", {}),
                params=doc.get("params", {}),
            )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc!r}") from None
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model: Model, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ModelFormatError(f"no such model file: {os.fspath(path)}") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed model file {os.fspath(path)}: {exc}") from None
    return model_from_dict(doc)
