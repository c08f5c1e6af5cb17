"""Post-hoc explanations: Shapley attributions, PDP/ICE, surrogate trees and LIME."""

from .lime import LimeResult, encode_segment, kernel_weights, lime_perturb, lime_segment
from .pdp import CurveSet, interaction_regions, is_monotone, pdp_ice, quantile_grid
from .shapley import (
    MARGIN,
    PROBABILITY,
    RAW,
    Attribution,
    conditional_expectation,
    global_importance,
    shap_matrix,
    shapley_brute_oracle,
    tree_shap_local,
    tree_shap_values,
)
from .surrogate import SurrogateFit, describe_model, fidelity, fit_surrogate_tree, top_split_features, tree_rules

__all__ = [
    "MARGIN",
    "PROBABILITY",
    "RAW",
    "Attribution",
    "CurveSet",
    "LimeResult",
    "SurrogateFit",
    "conditional_expectation",
    "describe_model",
    "encode_segment",
    "fidelity",
    "fit_surrogate_tree",
    "global_importance",
    "interaction_regions",
    "is_monotone",
    "kernel_weights",
    "lime_perturb",
    "lime_segment",
    "pdp_ice",
    "quantile_grid",
    "shap_matrix",
    "shapley_brute_oracle",
    "top_split_features",
    "tree_rules",
    "tree_shap_local",
    "tree_shap_values",
]
