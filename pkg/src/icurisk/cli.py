"""Command-line interface: the pipeline stages as composable subcommands."""

from __future__ import annotations

import json
import sys

import click

from . import __version__, dataio, pipeline
from .errors import PipelineError
from .nomogram import load_bundle


def _build_config(**kwargs):
    """Config file first, then explicit flag overrides."""
    config_path = kwargs.pop("config", None)
    overrides = {k: v for k, v in kwargs.items() if v is not None}
    for key in ("horizons", "smote_thresholds", "smote_weights", "force_include", "force_exclude"):
        if key in overrides and isinstance(overrides[key], str):
            parts = [p for p in overrides[key].split(",") if p]
            if key in ("force_include", "force_exclude"):
                overrides[key] = tuple(parts)
            else:
                overrides[key] = tuple(float(p) for p in parts)
    if config_path:
        return pipeline.PipelineConfig.from_file(config_path, overrides)
    return pipeline.PipelineConfig.from_dict(overrides)


def _common_options(fn):
    fn = click.option("--config", type=click.Path(exists=True), default=None,
                      help="TOML or JSON config file; flags override it.")(fn)
    fn = click.option("--input-csv", "input_csv", type=click.Path(), default=None)(fn)
    fn = click.option("--out-dir", "out_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--dictionary", "dictionary_json", type=click.Path(), default=None)(fn)
    return fn


def _run_stage(stage_fn, kwargs):
    cfg = _build_config(**kwargs)
    try:
        result = stage_fn(cfg)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps(result, sort_keys=True, default=str))


@click.group()
@click.version_option(__version__)
def main():
    """Short-term mortality risk pipeline."""


@main.command()
@_common_options
def ingest(**kwargs):
    """Validate the cohort CSV against the data dictionary."""
    _run_stage(pipeline.stage_ingest, kwargs)


@main.command("filter")
@_common_options
@click.option("--min-age", type=float, default=None)
@click.option("--max-age", type=float, default=None)
@click.option("--min-icu-days", type=float, default=None)
def filter_cmd(**kwargs):
    """Apply inclusion criteria and derive outcomes."""
    _run_stage(pipeline.stage_filter, kwargs)


@main.command()
@_common_options
@click.option("--knn-k", type=int, default=None)
@click.option("--missing-threshold", type=float, default=None)
def preprocess(**kwargs):
    """Drop high-missingness columns and KNN-impute the rest."""
    _run_stage(pipeline.stage_preprocess, kwargs)


@main.command()
@_common_options
@click.option("--split-ratio", type=float, default=None)
def split(**kwargs):
    """Stratified train/test split."""
    _run_stage(pipeline.stage_split, kwargs)


@main.command()
@_common_options
@click.option("--k", "k_best", type=int, default=None, help="Filter-stage feature count.")
@click.option("--target", "n_target", type=int, default=None, help="Final feature count.")
@click.option("--force-include", type=str, default=None, help="Comma-separated names.")
@click.option("--force-exclude", type=str, default=None, help="Comma-separated names.")
def select(**kwargs):
    """Two-stage feature selection with VIF screen."""
    _run_stage(pipeline.stage_select, kwargs)


@main.command()
@_common_options
@click.option("--thresholds", "smote_thresholds", type=str, default=None,
              help="Comma-separated interval thresholds in days.")
@click.option("--weights", "smote_weights", type=str, default=None,
              help="Comma-separated interval weights.")
@click.option("--n", "smote_n_synthetic", type=int, default=None)
@click.option("--k", "smote_k_neighbors", type=int, default=None)
@click.option("--delta", "smote_noise_delta", type=str, default=None,
              help="Noise half-width; 'auto' = 0.05 x sd(y).")
@click.option("--smote-pool-size", "smote_pool_size", type=int, default=None)
def resample(**kwargs):
    """Augment the training data with threshold-weighted SMOTE."""
    delta = kwargs.get("smote_noise_delta")
    if delta is not None:
        kwargs["smote_noise_delta"] = None if delta == "auto" else float(delta)
    _run_stage(pipeline.stage_resample, kwargs)


@main.command()
@_common_options
def train(**kwargs):
    """Fit the horizon logistic models and the Cox model."""
    _run_stage(pipeline.stage_train, kwargs)


@main.command()
@_common_options
@click.option("--bootstrap-replicates", type=int, default=None)
@click.option("--ci-level", type=float, default=None)
def evaluate(**kwargs):
    """Compute test-set metrics, curves, and cohort comparisons."""
    _run_stage(pipeline.stage_evaluate, kwargs)


@main.command()
@_common_options
@click.option("--permutation-repeats", type=int, default=None)
def explain(**kwargs):
    """Permutation importance and attribution summaries."""
    _run_stage(pipeline.stage_explain, kwargs)


@main.command()
@_common_options
def nomogram(**kwargs):
    """Render nomogram SVGs and export the UI bundle."""
    _run_stage(pipeline.stage_nomogram, kwargs)


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--input-csv", "input_csv", type=click.Path(), default=None)
@click.option("--out-dir", "out_dir", type=click.Path(), default=None)
@click.option("--seed", type=int, required=True)
@click.option("--dictionary", "dictionary_json", type=click.Path(), default=None)
def run(**kwargs):
    """Run the full pipeline end to end."""
    cfg = _build_config(**kwargs)
    try:
        out = pipeline.run_pipeline(cfg)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e
    click.echo(out)


@main.command()
@click.option("--bundle", "bundle_path", type=click.Path(exists=True), required=True)
@click.option("--patient", "patient_json", type=click.Path(exists=True), default=None,
              help="JSON file of feature name -> value.")
@click.option("--value", "values", type=str, multiple=True,
              help="Inline input as name=value; repeatable.")
def predict(bundle_path, patient_json, values):
    """Per-horizon risk, point breakdown, and attributions for one patient."""
    bundle = load_bundle(bundle_path)
    patient = {}
    if patient_json:
        patient.update(dataio.read_json(patient_json))
    for pair in values:
        if "=" not in pair:
            raise click.ClickException(f"--value needs name=value, got '{pair}'")
        name, _, raw = pair.partition("=")
        patient[name.strip()] = float(raw)
    try:
        result = pipeline.predict_from_bundle(bundle, patient)
    except PipelineError as e:
        raise click.ClickException(str(e)) from e
    click.echo(json.dumps(result, indent=2, sort_keys=True))


if __name__ == "__main__":
    sys.exit(main())
