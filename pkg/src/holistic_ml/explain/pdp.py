"""Partial dependence, ICE curves and ICE-divergence interaction regions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..data import Frame, Role
from ..errors import ModelError
from ..models import GbmModel, LinearModel, TreeModel, model_output

Scorer = Union[TreeModel, GbmModel, LinearModel, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class CurveSet:
    feature: str
    grid: np.ndarray
    pdp: np.ndarray
    ice: np.ndarray
    divergence: np.ndarray
    output_space: str = "probability"


def _design(model: Scorer, rows: Frame) -> tuple[np.ndarray, list[str]]:
    names = list(getattr(model, "feature_names", rows.feature_names))
    missing = [n for n in names if n not in rows]
    if missing:
        raise ModelError(f"schema mismatch: rows lack model features {missing}")
    return rows.matrix(names), names


def quantile_grid(values: np.ndarray, grid_size: int) -> np.ndarray:
    """Deduplicated quantiles at ``grid_size`` evenly spaced probabilities (min and max included)."""
    return np.unique(np.quantile(values, np.linspace(0.0, 1.0, grid_size)))


def pdp_ice(
    model: Scorer,
    rows: Frame,
    feature: str,
    grid_size: int = 20,
    space: str = "probability",
    grid: np.ndarray | None = None,
) -> CurveSet:
    """Sweep ``feature`` over a grid for every row.

    ``model`` is any package model or a plain callable mapping a design matrix
    (columns in ``rows.feature_names`` order) to outputs. ``divergence[j]`` is
    the spread (population standard deviation) of the ICE curves after each is
    shifted to start at zero on the leftmost grid point.
    """
    if grid_size < 2:
        raise ModelError("grid_size must be at least 2")
    if rows.n_rows == 0:
        raise ModelError("PDP/ICE needs at least one row")
    col = rows.column(feature)
    if col.role is Role.TARGET:
        raise ModelError("cannot sweep the target column")
    x, names = _design(model, rows)
    if feature not in names:
        raise ModelError(f"model does not use feature {feature!r}")
    j = names.index(feature)
    if grid is None:
        grid = quantile_grid(x[:, j], grid_size)
    else:
        grid = np.unique(np.asarray(grid, dtype=np.float64))

    ice = np.empty((len(x), len(grid)))
    swept = x.copy()
    for k, g in enumerate(grid):
        swept[:, j] = g
        ice[:, k] = model_output(model, swept, space)
    pdp = ice.mean(axis=0)
    centred = ice - ice[:, :1]
    divergence = centred.std(axis=0)
    return CurveSet(feature, grid, pdp, ice, divergence, space)


def interaction_regions(
    curves: CurveSet,
    factor: float = 2.0,
    baseline: str = "peak",
    atol: float = 1e-9,
) -> list[tuple[float, float]]:
    """Grid intervals where the ICE curves fan out.

    ``baseline="peak"`` keeps grid points whose divergence is at least
    ``max / factor`` (the width of the divergence peak; at the default factor
    that is the half-maximum width). ``baseline="median"`` keeps points above
    ``factor * median``, which only isolates interactions confined to a small
    part of the grid. Divergence at or below ``atol`` counts as zero, so
    rounding noise on an additive model never produces a region. Regions are
    maximal runs reported as ``(first grid value, last grid value)``.
    """
    div = np.asarray(curves.divergence)
    if len(div) < 2:
        return []
    if factor <= 0:
        raise ModelError("factor must be positive")
    if baseline == "peak":
        hot = div >= float(div.max()) / factor
    elif baseline == "median":
        hot = div > factor * float(np.median(div))
    else:
        raise ModelError(f"unknown baseline {baseline!r}")
    hot &= div > atol
    regions = []
    start = None
    for k, flag in enumerate(hot):
        if flag and start is None:
            start = k
        if not flag and start is not None:
            regions.append((float(curves.grid[start]), float(curves.grid[k - 1])))
            start = None
    if start is not None:
        regions.append((float(curves.grid[start]), float(curves.grid[-1])))
    return regions


def is_monotone(curve: np.ndarray, direction: int) -> bool:
    """Exact check on successive points; ``direction`` is +1 or -1."""
    steps = np.diff(np.asarray(curve))
    return bool((steps >= 0).all()) if direction > 0 else bool((steps <= 0).all())
