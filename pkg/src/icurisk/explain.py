"""Model interpretability: permutation importance and exact linear attributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingleClass
from .evaluate import auroc
from .model import LogisticModel, _assemble, _sigmoid
from .preprocess import FeatureMatrix
from .resample import substream


@dataclass
class AttributionReport:
    feature_names: list[str]
    values: list[float]
    base_value: float
    method: str  # "permutation" | "linear_additive"

    def to_dict(self):
        return {
            "method": self.method,
            "feature_names": list(self.feature_names),
            "values": [float(v) for v in self.values],
            "base_value": float(self.base_value),
        }


def _score_rows(model: LogisticModel, values: np.ndarray) -> np.ndarray:
    z = (values - model.norm_stats.mean) / model.norm_stats.sd
    return _sigmoid(model.intercept + z @ model.coefficients)


def permutation_importance(
    model: LogisticModel, X_test: FeatureMatrix, labels, n_repeats: int = 20, seed: int = 0
) -> AttributionReport:
    """Mean AUROC drop from shuffling one column at a time.

    Each (feature, repeat) pair owns its own RNG substream, so the result
    does not depend on evaluation order. base_value carries the baseline
    AUROC. Features are reported in descending drop order.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if not (np.any(labels == 1.0) and np.any(labels == 0.0)):
        raise SingleClass("permutation importance needs both classes")
    if list(X_test.names) != list(model.feature_names):
        raise ValueError("matrix columns must match model features")
    if X_test.missing_mask.any():
        raise ValueError("permutation importance requires a complete matrix")

    values = X_test.values
    n, d = values.shape
    base = auroc(_score_rows(model, values), labels)
    drops = np.zeros(d)
    for j in range(d):
        acc = 0.0
        for r in range(n_repeats):
            rng = np.random.default_rng(substream(seed, j, r))
            shuffled = values.copy()
            shuffled[:, j] = values[rng.permutation(n), j]
            acc += base - auroc(_score_rows(model, shuffled), labels)
        drops[j] = acc / n_repeats

    order = sorted(range(d), key=lambda j: (-drops[j], j))
    return AttributionReport(
        feature_names=[model.feature_names[j] for j in order],
        values=[float(drops[j]) for j in order],
        base_value=float(base),
        method="permutation",
    )


def linear_attribution(
    model: LogisticModel, background: FeatureMatrix, x
) -> AttributionReport:
    """Per-feature logit contribution relative to the background mean.

    attribution_i = beta_i * (z_i(x) - mean_i(z(background))); together
    with base_value (the logit at the background mean) they decompose the
    model logit exactly, which for a linear model is the Shapley value.
    """
    if len(background.values) == 0:
        raise ValueError("background must be nonempty")
    if list(background.names) != list(model.feature_names):
        raise ValueError("background columns must match model features")
    vec = _assemble(x, model.feature_names)
    z = (vec - model.norm_stats.mean) / model.norm_stats.sd
    z_bg = (background.values - model.norm_stats.mean) / model.norm_stats.sd
    z_bar = z_bg.mean(axis=0)
    attr = model.coefficients * (z - z_bar)
    base = float(model.intercept + model.coefficients @ z_bar)
    return AttributionReport(
        feature_names=list(model.feature_names),
        values=[float(v) for v in attr],
        base_value=base,
        method="linear_additive",
    )


def attribution_from_background_mean(
    intercept, coefficients, norm_mean, norm_sd, z_bar, x
):
    """Attribution arithmetic shared with the exported bundle (no model object)."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    z = (np.asarray(x, dtype=np.float64) - norm_mean) / norm_sd
    attr = coefficients * (z - z_bar)
    base = float(intercept + coefficients @ z_bar)
    return attr, base


def summary_distribution(
    model: LogisticModel, X_test: FeatureMatrix, background: FeatureMatrix
):
    """Per-instance attribution matrix plus mean-|attribution| ranking.

    Returns (matrix n x d in model feature order, ranked names, ranked
    mean absolute attributions).
    """
    if len(X_test.values) == 0:
        raise ValueError("X_test must be nonempty")
    if list(X_test.names) != list(model.feature_names):
        raise ValueError("matrix columns must match model features")
    z = (X_test.values - model.norm_stats.mean) / model.norm_stats.sd
    z_bg = (background.values - model.norm_stats.mean) / model.norm_stats.sd
    z_bar = z_bg.mean(axis=0)
    matrix = model.coefficients[None, :] * (z - z_bar[None, :])
    mean_abs = np.abs(matrix).mean(axis=0)
    order = sorted(range(len(model.feature_names)), key=lambda j: (-mean_abs[j], j))
    return (
        matrix,
        [model.feature_names[j] for j in order],
        [float(mean_abs[j]) for j in order],
    )
