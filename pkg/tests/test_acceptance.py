"""Acceptance gate: one test per release criterion.

Each test is a single pass/fail line under `pytest -v`. Tolerances and
time budgets are part of the criteria, so they are asserted here rather
than in the per-module suites.
"""

import json
import os
import time

import numpy as np
import pytest

from icurisk import _kernels
from icurisk.cohort import SurvivalOutcome
from icurisk.explain import linear_attribution
from icurisk.model import (
    fit_cox,
    fit_logistic,
    logistic_loglik_grad,
    logit_of,
)
from icurisk.nomogram import load_bundle
from icurisk.pipeline import PipelineConfig, predict_from_bundle, run_pipeline
from icurisk.preprocess import FeatureMatrix, NormStats, base_excess, zscore_fit_transform
from icurisk.resample import SmoteConfig, smote_augment

from conftest import write_planted_csv
from oracles import auroc_pairwise, c_index_pairwise, cox_grid_single, fd_gradient

HORIZONS = (7, 14, 28)


def matrix(values, names):
    values = np.asarray(values, dtype=np.float64)
    return FeatureMatrix(
        values=values,
        missing_mask=np.zeros(values.shape, dtype=bool),
        names=list(names),
        units=[""] * values.shape[1],
    )


def read_artifact(run, name):
    with open(os.path.join(run["out_dir"], name)) as fh:
        return json.load(fh)


def test_auroc_equals_pairwise_oracle_on_fifty_random_sets():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    for _ in range(50):
        scores = np.round(rng.random(20), 1)  # coarse grid forces ties
        labels = (rng.random(20) < 0.5).astype(np.float64)
        if labels.min() == labels.max():
            labels[0] = 1.0 - labels[0]
        assert _kernels.auroc(scores, labels) == auroc_pairwise(scores, labels)
    assert time.perf_counter() - start < 1.0


def test_c_index_equals_pairwise_oracle_on_fifty_random_sets():
    rng = np.random.default_rng(1002)
    start = time.perf_counter()
    for _ in range(50):
        risk = np.round(rng.normal(0, 1, 12), 1)
        times = np.round(rng.uniform(1, 30, 12), 0) + 1.0
        events = (rng.random(12) < 0.6).astype(np.float64)
        if events.sum() == 0:
            events[0] = 1.0
        num, den = _kernels.cindex_counts(risk, times, events)
        assert (num, den) == c_index_pairwise(risk, times, events)
    assert time.perf_counter() - start < 1.0


def test_logistic_gradient_matches_central_differences():
    rng = np.random.default_rng(1003)
    design = np.column_stack([np.ones(200), rng.normal(0, 1, (200, 7))])
    labels = (rng.random(200) < 0.4).astype(np.float64)
    mask = np.ones(8)
    mask[0] = 0.0
    for _ in range(10):
        beta = rng.normal(0, 1, 8)
        _, grad, _ = logistic_loglik_grad(design, labels, beta, 1e-6, mask)
        approx = fd_gradient(
            lambda b: logistic_loglik_grad(design, labels, b, 1e-6, mask)[0], beta, h=1e-5
        )
        assert np.abs(grad - approx).max() <= 1e-6 * max(1.0, np.abs(grad).max())


def test_cox_fit_matches_dense_grid_search():
    x = np.array([0.2, -0.5, 1.3, -0.8, 1.1, 0.4, -1.9, 0.3])
    times = [6.0, 10.0, 3.0, 5.0, 12.0, 9.0, 2.0, 11.0]
    events = [True, False, True, True, False, True, True, False]
    start = time.perf_counter()
    grid_beta = cox_grid_single(x, np.asarray(times), np.asarray(events))
    assert grid_beta == -0.7346000000099409  # frozen from the oracle itself
    design = matrix(x[:, None], ["x"])
    design.norm_stats = NormStats(names=["x"], mean=np.zeros(1), sd=np.ones(1))
    model = fit_cox(
        design, [SurvivalOutcome(time_days=t, event=e) for t, e in zip(times, events)]
    )
    assert abs(model.coefficients[0] - grid_beta) < 1e-3
    assert time.perf_counter() - start < 5.0


def _clustered_survival_fixture():
    """Three tight clusters, one per resampling interval, 20 rows each."""
    rng = np.random.default_rng(4041)
    centers = np.array(
        [[0.0, 0.0, 0.0, 0.0], [50.0, 50.0, 50.0, 50.0], [100.0, 100.0, 100.0, 100.0]]
    )
    t_ranges = [(2.0, 4.0), (15.0, 25.0), (60.0, 80.0)]
    rows, times = [], []
    for center, (lo, hi) in zip(centers, t_ranges):
        rows.append(center + rng.normal(0, 0.5, (20, 4)))
        times.append(rng.uniform(lo, hi, 20))
    return matrix(np.vstack(rows), ["a", "b", "c", "d"]), np.concatenate(times)


def test_resampling_shape_law_and_interval_frequencies():
    x, y = _clustered_survival_fixture()

    out, y_out = smote_augment(x, y, SmoteConfig(n_synthetic=2000, k_neighbors=5, seed=77))
    assert out.shape == (60 + 2000, 4)
    assert y_out.shape == (2060,)
    assert np.array_equal(out.values[:60], x.values)

    # the clusters sit strictly inside their intervals, so every synthetic
    # survival time is attributable to the interval of its seed instance
    _, y_big = smote_augment(x, y, SmoteConfig(n_synthetic=10000, k_neighbors=5, seed=77))
    synth = y_big[60:]
    freqs = np.array(
        [
            (synth <= 7.0).mean(),
            ((synth > 7.0) & (synth <= 35.0)).mean(),
            (synth > 35.0).mean(),
        ]
    )
    expected = np.array([40.0, 20.0, 1.0]) / 61.0
    assert np.abs(freqs - expected).max() <= 0.01


def test_base_excess_reference_zero_and_affine_response():
    for hb in (0.0, 10.0, 20.0):
        assert base_excess(24.4, hb, 7.4) == 0.0
    # affine in each argument: midpoint value equals mean of endpoint values
    probes = {
        "bicarbonate": [(10.0, 30.0), (18.0, 26.0)],
        "hemoglobin": [(0.0, 20.0), (5.0, 15.0)],
        "ph": [(7.0, 7.7), (7.2, 7.6)],
    }
    base = {"bicarbonate": 22.0, "hemoglobin": 12.0, "ph": 7.35}
    for arg, spans in probes.items():
        for lo, hi in spans:
            args_lo, args_hi, args_mid = dict(base), dict(base), dict(base)
            args_lo[arg], args_hi[arg], args_mid[arg] = lo, hi, (lo + hi) / 2.0
            f_lo = base_excess(args_lo["bicarbonate"], args_lo["hemoglobin"], args_lo["ph"])
            f_hi = base_excess(args_hi["bicarbonate"], args_hi["hemoglobin"], args_hi["ph"])
            f_mid = base_excess(args_mid["bicarbonate"], args_mid["hemoglobin"], args_mid["ph"])
            assert abs(f_mid - (f_lo + f_hi) / 2.0) <= 1e-12


def test_pipeline_recovers_planted_signal_within_bayes_bound(acceptance_run):
    assert acceptance_run["elapsed"] < 120.0
    selected = set(acceptance_run["manifest"]["stages"]["select"]["selected"])
    planted = {f"feature_{i:02d}" for i in range(7)}
    assert len(selected & planted) >= 6
    oracle = acceptance_run["oracle"]
    for h in HORIZONS:
        measured = read_artifact(acceptance_run, f"metrics_{h}d.json")["auroc"]
        ideal = oracle.bayes_auroc(h, seed=5)
        assert abs(measured - ideal) <= 0.03, f"{h}d: {measured:.4f} vs {ideal:.4f}"


def test_nomogram_points_table_round_trip(acceptance_run):
    bundle = load_bundle(os.path.join(acceptance_run["out_dir"], "bundle.json"))
    names = bundle["feature_names"]
    axes = bundle["horizons"]["7"]["nomogram"]["axes"]
    ranges = {a["name"]: (a["lo"], a["hi"]) for a in axes}
    rng = np.random.default_rng(1004)
    for _ in range(1000):
        patient = {nm: float(rng.uniform(*ranges[nm])) for nm in names}
        out = predict_from_bundle(bundle, patient)
        for h in HORIZONS:
            res = out[str(h)]
            assert res["clamped"] == []
            assert abs(res["probability"] - res["probability_from_points"]) <= 1e-6


def test_attributions_sum_to_score_and_zero_coefficients_stay_zero():
    rng = np.random.default_rng(1005)
    x = rng.normal(0, 1, (1500, 4))
    logit = 1.5 * x[:, 0] - 0.8 * x[:, 1] + 0.3 * x[:, 2]
    labels = (rng.random(1500) < 1.0 / (1.0 + np.exp(-logit))).astype(np.float64)
    names = ["w", "x", "y", "z"]
    model = fit_logistic(zscore_fit_transform(matrix(x, names)), labels)
    background = matrix(rng.normal(0, 1, (300, 4)), names)

    zeroed = type(model).from_dict(model.to_dict())
    zeroed.coefficients[3] = 0.0
    for _ in range(1000):
        point = rng.normal(0, 2, 4)
        report = linear_attribution(model, background, point)
        total = report.base_value + sum(report.values)
        assert abs(total - logit_of(model, point)) <= 1e-9
        zero_report = linear_attribution(zeroed, background, point)
        assert dict(zip(zero_report.feature_names, zero_report.values))["z"] == 0.0


def test_repeated_runs_produce_byte_identical_artifacts(tmp_path):
    csv = str(tmp_path / "cohort.csv")
    write_planted_csv(csv, n_patients=800, missingness=0.05, censoring=0.05, seed=8080)
    outputs = []
    for sub in ("first", "second"):
        cfg = PipelineConfig(
            input_csv=csv,
            out_dir=str(tmp_path / sub),
            seed=23,
            smote_n_synthetic=400,
            bootstrap_replicates=300,
        )
        run_pipeline(cfg)
        outputs.append(cfg.out_dir)
    first, second = outputs
    names = sorted(os.listdir(first))
    assert names == sorted(os.listdir(second))
    for name in names:
        with open(os.path.join(first, name), "rb") as fh:
            a = fh.read()
        with open(os.path.join(second, name), "rb") as fh:
            b = fh.read()
        assert a == b, f"artifact differs between runs: {name}"


def test_pr_auc_rises_with_horizon_prevalence(acceptance_run):
    reports = [read_artifact(acceptance_run, f"metrics_{h}d.json") for h in HORIZONS]
    prevalence = [r["n_events"] / r["n_test"] for r in reports]
    assert prevalence[0] < prevalence[1] < prevalence[2]
    pr = [r["pr_auc"] for r in reports]
    assert pr[0] < pr[1] < pr[2]
