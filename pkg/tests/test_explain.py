"""Permutation importance and additive attributions."""

import numpy as np
import pytest

from icurisk.errors import SingleClass
from icurisk.explain import (
    linear_attribution,
    permutation_importance,
    summary_distribution,
)
from icurisk.model import fit_logistic, logit_of
from icurisk.preprocess import FeatureMatrix, zscore_fit_transform


def matrix(values, names=None):
    values = np.asarray(values, dtype=np.float64)
    names = names or [f"f{j}" for j in range(values.shape[1])]
    return FeatureMatrix(
        values=values,
        missing_mask=np.zeros(values.shape, dtype=bool),
        names=names,
        units=[""] * values.shape[1],
    )


@pytest.fixture(scope="module")
def fitted():
    """Model with one strong, one weak, and one dead column."""
    rng = np.random.default_rng(42)
    x = rng.normal(0, 1, (1500, 3))
    logit = 2.0 * x[:, 0] + 0.4 * x[:, 1]
    labels = (rng.random(1500) < 1.0 / (1.0 + np.exp(-logit))).astype(float)
    model = fit_logistic(
        zscore_fit_transform(matrix(x, names=["strong", "weak", "dead"])), labels
    )
    test = matrix(rng.normal(0, 1, (400, 3)), names=["strong", "weak", "dead"])
    test_labels = (
        rng.random(400)
        < 1.0 / (1.0 + np.exp(-(2.0 * test.values[:, 0] + 0.4 * test.values[:, 1])))
    ).astype(float)
    return model, test, test_labels


class TestPermutationImportance:
    def test_ranking_and_base_value(self, fitted):
        model, test, labels = fitted
        report = permutation_importance(model, test, labels, n_repeats=10, seed=0)
        assert report.feature_names[0] == "strong"
        assert report.method == "permutation"
        drops = dict(zip(report.feature_names, report.values))
        assert drops["strong"] > drops["weak"] > abs(drops["dead"])
        from icurisk.evaluate import auroc
        from icurisk.explain import _score_rows

        assert report.base_value == auroc(_score_rows(model, test.values), labels)

    def test_zero_coefficient_exactly_zero_drop(self, fitted):
        model, test, labels = fitted
        zeroed = type(model).from_dict(model.to_dict())
        zeroed.coefficients[2] = 0.0
        report = permutation_importance(zeroed, test, labels, n_repeats=5, seed=1)
        assert dict(zip(report.feature_names, report.values))["dead"] == 0.0

    def test_deterministic_by_seed(self, fitted):
        model, test, labels = fitted
        a = permutation_importance(model, test, labels, n_repeats=5, seed=7)
        b = permutation_importance(model, test, labels, n_repeats=5, seed=7)
        c = permutation_importance(model, test, labels, n_repeats=5, seed=8)
        assert a.values == b.values
        assert a.values != c.values

    def test_single_class_rejected(self, fitted):
        model, test, _ = fitted
        with pytest.raises(SingleClass):
            permutation_importance(model, test, np.ones(400), n_repeats=2)

    def test_column_mismatch(self, fitted):
        model, test, labels = fitted
        renamed = matrix(test.values, names=["a", "b", "c"])
        with pytest.raises(ValueError, match="match"):
            permutation_importance(model, renamed, labels, n_repeats=2)


class TestLinearAttribution:
    def test_efficiency_decomposition(self, fitted):
        model, test, _ = fitted
        background = test
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.normal(0, 2, 3)
            report = linear_attribution(model, background, x)
            total = report.base_value + sum(report.values)
            assert total == pytest.approx(logit_of(model, x), abs=1e-9)

    def test_zero_coefficient_zero_attribution(self, fitted):
        model, test, _ = fitted
        zeroed = type(model).from_dict(model.to_dict())
        zeroed.coefficients[2] = 0.0
        report = linear_attribution(zeroed, test, [0.5, -1.0, 3.0])
        assert dict(zip(report.feature_names, report.values))["dead"] == 0.0

    def test_background_mean_patient_gets_zero_attributions(self, fitted):
        model, test, _ = fitted
        x = test.values.mean(axis=0)
        report = linear_attribution(model, test, x)
        assert np.abs(report.values).max() < 1e-9

    def test_empty_background_rejected(self, fitted):
        model, test, _ = fitted
        empty = matrix(np.empty((0, 3)), names=list(test.names))
        with pytest.raises(ValueError, match="nonempty"):
            linear_attribution(model, empty, [0.0, 0.0, 0.0])


class TestSummaryDistribution:
    def test_ranking_by_mean_absolute_attribution(self, fitted):
        model, test, _ = fitted
        mat, names, means = summary_distribution(model, test, test)
        assert mat.shape == (400, 3)
        assert names[0] == "strong"
        assert means == sorted(means, reverse=True)

    def test_matrix_rows_match_single_calls(self, fitted):
        model, test, _ = fitted
        mat, _, _ = summary_distribution(model, test, test)
        row = linear_attribution(model, test, test.values[5])
        by_name = dict(zip(row.feature_names, row.values))
        for j, name in enumerate(model.feature_names):
            assert mat[5, j] == pytest.approx(by_name[name], abs=1e-12)
