"""Weighted ridge regression through the normal equations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ModelError, SingularDesignError

# Condition number of the standardised Gram matrix above which an
# unpenalised system is treated as singular.
SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class LinearModel:
    coefficients: Mapping[str, float]
    intercept: float
    r_squared: float
    n_fit: int
    l2: float = 0.0
    weighted_mean: float = 0.0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", {k: float(v) for k, v in self.coefficients.items()})

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(self.coefficients)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Raw linear output for a matrix whose columns follow ``feature_names``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        beta = np.fromiter(self.coefficients.values(), dtype=np.float64, count=len(self.coefficients))
        if x.shape[1] != len(beta):
            raise ModelError(f"expected {len(beta)} columns, got {x.shape[1]}")
        return self.intercept + x @ beta


def weighted_r2(y: np.ndarray, fitted: np.ndarray, weights: np.ndarray) -> float:
    """Weighted coefficient of determination; 0 when ``y`` has no weighted variance."""
    total_w = weights.sum()
    mean = float(weights @ y) / total_w
    sst = float(weights @ (y - mean) ** 2)
    if sst <= 0.0:
        return 0.0
    sse = float(weights @ (y - fitted) ** 2)
    return 1.0 - sse / sst


def _solve(x, y, w, l2):
    """Coefficients and intercept for the penalised weighted least-squares problem.

    Columns are centred and scaled by their weighted standard deviation, so the
    ridge penalty acts on standardised coefficients and never on the intercept.
    Columns that are constant over the positively weighted rows get 0.
    """
    total_w = w.sum()
    mean_x = (w @ x) / total_w
    mean_y = float(w @ y) / total_w
    xc = x - mean_x
    yc = y - mean_y
    support = w > 0
    p = x.shape[1]
    active = np.array([np.ptp(x[support, j]) > 0 for j in range(p)], dtype=bool) if p else np.zeros(0, bool)
    beta = np.zeros(p)
    std_beta = np.zeros(p)
    if active.any():
        sd = np.sqrt((w @ xc[:, active] ** 2) / total_w)
        z = xc[:, active] / sd
        zw = z * w[:, None]
        gram = zw.T @ z
        rhs = zw.T @ yc
        if l2 == 0.0:
            corr = gram / total_w
            if not np.isfinite(corr).all() or np.linalg.cond(corr) > SINGULAR_COND:
                raise SingularDesignError(
                    "design matrix is rank deficient; refit with l2 > 0"
                )
        gram[np.diag_indices_from(gram)] += l2
        try:
            coef_z = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            raise SingularDesignError("normal equations are singular; refit with l2 > 0") from None
        std_beta[active] = coef_z
        beta[active] = coef_z / sd
    intercept = mean_y - float(mean_x @ beta)
    return beta, intercept, std_beta, mean_y


def fit_linear_weighted(
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    l2: float = 0.0,
    top_k: int | None = None,
    feature_names: Sequence[str] | None = None,
) -> LinearModel:
    """Weighted least squares with an optional ridge penalty and top-k selection.

    With ``top_k`` set, a preliminary fit on every column ranks features by the
    absolute standardised coefficient (ties to the lower column index) and the
    model is refit on the ``k`` best. Raises :class:`SingularDesignError` when
    ``l2 == 0`` and the design is rank deficient.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(y) != n or len(w) != n:
        raise ModelError(f"row counts differ: X has {n}, y has {len(y)}, weights has {len(w)}")
    if (w < 0).any() or not np.isfinite(w).all():
        raise ModelError("weights must be finite and non-negative")
    if not (w > 0).any():
        raise ModelError("at least one weight must be positive")
    if l2 < 0:
        raise ModelError("l2 must be non-negative")
    names = [f"x{j}" for j in range(p)] if feature_names is None else list(feature_names)
    if len(names) != p:
        raise ModelError("feature_names length does not match the number of columns")

    selected = list(range(p))
    if top_k is not None and top_k < p:
        if top_k < 0:
            raise ModelError("top_k must be non-negative")
        _, _, std_beta, _ = _solve(x, y, w, l2)
        ranked = sorted(range(p), key=lambda j: (-abs(std_beta[j]), j))
        selected = sorted(ranked[:top_k])

    xs = x[:, selected]
    beta, intercept, _, mean_y = _solve(xs, y, w, l2)
    fitted = intercept + xs @ beta
    return LinearModel(
        coefficients={names[j]: b for j, b in zip(selected, beta)},
        intercept=float(intercept),
        r_squared=weighted_r2(y, fitted, w),
        n_fit=int(n),
        l2=float(l2),
        weighted_mean=mean_y,
        params={"top_k": -1 if top_k is None else int(top_k)},
    )
