"""Shared fixtures: planted synthetic cohorts and session-scoped pipeline runs.

Two cohorts cover the suite. The large one is noise-free (no missingness,
no censoring) so measured discrimination can be compared against the
generator's own Bayes AUROC; the small one keeps both noise sources on so
imputation and censoring paths stay exercised end to end.
"""

import json
import os
import time

import numpy as np
import pytest

from icurisk.cohort import (
    SyntheticCohortSpec,
    generate_synthetic_cohort,
    write_cohort_csv,
)
from icurisk.pipeline import PipelineConfig, run_pipeline

PLANTED_COEFS = (1.0, -0.9, 0.8, -0.7, 0.6, 0.5, 0.45)
PLANTED_INTERCEPTS = (-3.45, -2.6, -1.8)
N_NOISE = 13


def planted_spec(n_patients, missingness, censoring, seed):
    coefs = np.zeros(len(PLANTED_COEFS) + N_NOISE)
    coefs[: len(PLANTED_COEFS)] = PLANTED_COEFS
    return SyntheticCohortSpec(
        n_patients=n_patients,
        n_features=coefs.size,
        planted_coefficients=coefs,
        planted_intercepts=PLANTED_INTERCEPTS,
        missingness_rate=missingness,
        censoring_rate=censoring,
        seed=seed,
    )


def write_planted_csv(path, n_patients, missingness, censoring, seed):
    table, oracle = generate_synthetic_cohort(
        planted_spec(n_patients, missingness, censoring, seed)
    )
    write_cohort_csv(table, path)
    return oracle


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    """Full pipeline on the 5000-patient noise-free planted cohort."""
    root = tmp_path_factory.mktemp("acceptance")
    csv = str(root / "cohort.csv")
    oracle = write_planted_csv(csv, 5000, 0.0, 0.0, seed=20240514)
    cfg = PipelineConfig(input_csv=csv, out_dir=str(root / "out"), seed=31)
    t0 = time.time()
    run_pipeline(cfg)
    elapsed = time.time() - t0
    with open(os.path.join(cfg.out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    return {
        "out_dir": cfg.out_dir,
        "cfg": cfg,
        "oracle": oracle,
        "manifest": manifest,
        "elapsed": elapsed,
        "input_csv": csv,
    }


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    """Full pipeline on a 900-patient cohort with missingness and censoring."""
    root = tmp_path_factory.mktemp("small")
    csv = str(root / "cohort.csv")
    oracle = write_planted_csv(csv, 900, 0.05, 0.05, seed=7701)
    cfg = PipelineConfig(
        input_csv=csv,
        out_dir=str(root / "out"),
        seed=17,
        smote_n_synthetic=400,
        bootstrap_replicates=500,
    )
    run_pipeline(cfg)
    with open(os.path.join(cfg.out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    return {
        "out_dir": cfg.out_dir,
        "cfg": cfg,
        "oracle": oracle,
        "manifest": manifest,
        "input_csv": csv,
    }


def artifact(run, *parts):
    return os.path.join(run["out_dir"], *parts)
