"""Local linear surrogates: fitted on a data segment or on perturbed samples around one row."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..data import Frame, Role, as_categorical, one_hot_encode
from ..errors import ModelError
from ..models import LinearModel, design_matrix, fit_linear_weighted, model_output

SEGMENT = "segment"
PERTURB = "perturb"

DEFAULT_L2 = 1e-3


@dataclass(frozen=True, eq=False)
class LimeResult:
    model: LinearModel
    mode: str
    n_samples: int
    segment: str | None = None
    anchor: Mapping[str, float] | None = None
    kernel_width: float | None = None
    design: np.ndarray | None = None
    response: np.ndarray | None = None
    weights: np.ndarray | None = None

    @property
    def coefficients(self) -> Mapping[str, float]:
        return self.model.coefficients

    @property
    def intercept(self) -> float:
        return self.model.intercept

    @property
    def r_squared(self) -> float:
        return self.model.r_squared


def encode_segment(segment: Frame, encode: Sequence[str], features: Sequence[str] | None = None) -> Frame:
    """One-hot ``encode`` columns (numeric ones are treated as categorical first) and keep ``features``."""
    numeric = [n for n in encode if segment.column(n).role is Role.NUMERIC]
    frame = as_categorical(segment, numeric) if numeric else segment
    frame = one_hot_encode(frame, list(encode))
    if features is not None:
        keep = []
        for name in features:
            if name in encode:
                keep.extend(n for n in frame.feature_names if n.startswith(f"{name} == "))
            else:
                keep.append(name)
        frame = frame.select(keep + ([frame.target_name] if frame.target_name else []))
    return frame


def lime_segment(
    reference,
    segment: Frame,
    encode: Sequence[str] = (),
    top_k: int | None = 7,
    l2: float = DEFAULT_L2,
    features: Sequence[str] | None = None,
    label: str | None = None,
) -> LimeResult:
    """Linear model of ``reference``'s probabilities over a segment of rows.

    ``features`` defaults to the reference model's inputs. The small default
    ridge keeps full one-hot blocks solvable alongside the intercept; pass
    ``l2=0`` for an unpenalised fit. Linear references are fitted on their
    unclamped output.
    """
    if segment.n_rows == 0:
        raise ModelError("segment is empty after filtering")
    target = model_output(reference, design_matrix(reference, segment), "probability")
    if features is None:
        features = getattr(reference, "feature_names", None)
    encoded = encode_segment(segment, encode, features)
    names = list(encoded.feature_names)
    if not names:
        raise ModelError("segment has no explanatory features")
    x = encoded.matrix(names)
    model = fit_linear_weighted(x, target, None, l2=l2, top_k=top_k, feature_names=names)
    return LimeResult(model, SEGMENT, segment.n_rows, segment=label, design=x, response=target,
                      weights=np.ones(len(x)))


def kernel_weights(distance: np.ndarray, kernel_width: float) -> np.ndarray:
    return np.exp(-(distance ** 2) / kernel_width ** 2)


def lime_perturb(
    reference,
    anchor,
    background: Frame | np.ndarray,
    n_samples: int = 5000,
    kernel_width: float | None = None,
    top_k: int | None = None,
    seed: int = 0,
    l2: float = DEFAULT_L2,
) -> LimeResult:
    """Weighted linear fit to ``reference`` on Gaussian perturbations of ``anchor``.

    Noise and distances are scaled by each feature's standard deviation in
    ``background``; the first sample is the anchor itself. The default kernel
    width is ``0.75 * sqrt(n_features)``. Coefficients are reported per raw unit.
    """
    if kernel_width is None:
        kernel_width = 0.75 * math.sqrt(len(reference.feature_names))
    if not kernel_width > 0:
        raise ModelError("kernel_width must be positive")
    names = list(reference.feature_names)
    if isinstance(anchor, Mapping):
        try:
            a = np.array([float(anchor[n]) for n in names])
        except KeyError as exc:
            raise ModelError(f"schema mismatch: anchor lacks feature {exc.args[0]!r}") from None
    else:
        a = design_matrix(reference, anchor)
        if len(a) != 1:
            raise ModelError("anchor must be a single row")
        a = a[0]
    p = len(names)
    needed = (p if top_k is None else min(top_k, p)) + 1
    if n_samples < needed:
        raise ModelError(f"n_samples must be at least {needed}")

    bg = design_matrix(reference, background)
    sd = bg.std(axis=0) if len(bg) > 1 else np.zeros(p)
    sd = np.where(sd > 0, sd, 1.0)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, p))
    z[0] = 0.0
    samples = a + z * sd
    weights = kernel_weights(np.sqrt((z ** 2).sum(axis=1)), kernel_width)
    target = model_output(reference, samples, "probability")

    std_model = fit_linear_weighted(z, target, weights, l2=l2, top_k=top_k, feature_names=names)
    coefs = {n: b / sd[names.index(n)] for n, b in std_model.coefficients.items()}
    intercept = std_model.intercept - sum(coefs[n] * a[names.index(n)] for n in coefs)
    model = LinearModel(
        coefficients=coefs,
        intercept=float(intercept),
        r_squared=std_model.r_squared,
        n_fit=std_model.n_fit,
        l2=std_model.l2,
        weighted_mean=std_model.weighted_mean,
        params=dict(std_model.params, kernel_width=float(kernel_width), seed=int(seed)),
    )
    return LimeResult(model, PERTURB, n_samples, anchor=dict(zip(names, a.tolist())),
                      kernel_width=float(kernel_width), design=samples, response=target, weights=weights)
