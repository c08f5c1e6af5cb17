"""Model families, scoring, metrics and persistence."""

from __future__ import annotations

from typing import Union

import numpy as np

from ..data import Frame
from ..errors import ModelError
from .gbm import GbmModel, logistic_loss, monotone_from_correlation, train_gbm
from .linear import LinearModel, fit_linear_weighted, weighted_r2
from .metrics import accuracy, auc
from .persist import load_model, model_from_dict, model_to_dict, save_model
from .tree import (
    CLASSIFICATION,
    REGRESSION,
    TreeGrower,
    TreeModel,
    constant_tree,
    stump,
    train_regression_tree,
    train_tree,
)

Model = Union[TreeModel, GbmModel, LinearModel]

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "GbmModel",
    "LinearModel",
    "Model",
    "TreeGrower",
    "TreeModel",
    "accuracy",
    "auc",
    "constant_tree",
    "design_matrix",
    "fit_linear_weighted",
    "load_model",
    "logistic_loss",
    "model_from_dict",
    "model_output",
    "model_to_dict",
    "monotone_from_correlation",
    "predict_proba",
    "save_model",
    "stump",
    "train_gbm",
    "train_regression_tree",
    "train_tree",
    "weighted_r2",
]


def design_matrix(model: Model, rows: Frame | np.ndarray) -> np.ndarray:
    """Feature matrix in the column order the model was trained with."""
    names = list(model.feature_names)
    if isinstance(rows, Frame):
        missing = [n for n in names if n not in rows]
        if missing:
            raise ModelError(f"schema mismatch: rows lack model features {missing}")
        return rows.matrix(names)
    x = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if x.shape[1] != len(names):
        raise ModelError(f"schema mismatch: model expects {len(names)} features, rows have {x.shape[1]}")
    return x


def model_output(model: Model, x: np.ndarray, space: str = "probability") -> np.ndarray:
    """Model output on a design matrix.

    ``space="margin"`` gives log-odds for boosted models; trees and linear
    models only have their native output, which is returned for either space.
    """
    if isinstance(model, GbmModel):
        if space == "margin":
            return model.margin(x)
        if space == "probability":
            return model.predict_proba(x)
        raise ModelError(f"unknown output space {space!r}")
    if isinstance(model, TreeModel):
        return model.predict_raw(x)
    if isinstance(model, LinearModel):
        return model.predict(x)
    if callable(model):
        return np.asarray(model(x), dtype=np.float64)
    raise ModelError(f"unsupported model type {type(model).__name__}")


def predict_proba(model: Model, rows: Frame | np.ndarray) -> np.ndarray:
    """Per-row probability of the positive class.

    Linear outputs are clamped to [0, 1]; the unclamped values are available
    from :meth:`LinearModel.predict`.
    """
    x = design_matrix(model, rows)
    if isinstance(model, LinearModel):
        return np.clip(model.predict(x), 0.0, 1.0)
    return model_output(model, x, "probability")
