"""Command-line surface: subcommand wiring, config precedence, predict output."""

import json
import os

import pytest
from click.testing import CliRunner

from icurisk import __version__
from icurisk.cli import main

from conftest import write_planted_csv


@pytest.fixture(scope="module")
def cohort_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "cohort.csv"
    write_planted_csv(str(path), n_patients=400, missingness=0.02, censoring=0.02, seed=404)
    return str(path)


@pytest.fixture(scope="module")
def full_run(cohort_csv, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli_run") / "artifacts")
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["run", "--input-csv", cohort_csv, "--out-dir", out, "--seed", "3"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    return out


def test_version_flag():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_run_prints_out_dir_and_writes_manifest(full_run):
    assert os.path.exists(os.path.join(full_run, "manifest.json"))
    assert os.path.exists(os.path.join(full_run, "bundle.json"))


def test_run_requires_seed(cohort_csv, tmp_path):
    result = CliRunner().invoke(
        main, ["run", "--input-csv", cohort_csv, "--out-dir", str(tmp_path / "o")]
    )
    assert result.exit_code != 0
    assert "--seed" in result.output


def test_staged_invocation_matches_single_run(cohort_csv, full_run, tmp_path):
    out = str(tmp_path / "staged")
    runner = CliRunner()
    base = ["--input-csv", cohort_csv, "--out-dir", out, "--seed", "3"]
    for cmd in (
        "ingest",
        "filter",
        "preprocess",
        "split",
        "select",
        "resample",
        "train",
        "evaluate",
        "explain",
        "nomogram",
    ):
        result = runner.invoke(main, [cmd] + base, catch_exceptions=False)
        assert result.exit_code == 0, f"{cmd}: {result.output}"
        json.loads(result.output)  # stage summaries print as JSON

    with open(os.path.join(out, "bundle.json")) as fh:
        staged = fh.read()
    with open(os.path.join(full_run, "bundle.json")) as fh:
        single = fh.read()
    assert staged == single


def test_stage_summary_content(cohort_csv, tmp_path):
    out = str(tmp_path / "o")
    result = CliRunner().invoke(
        main,
        ["ingest", "--input-csv", cohort_csv, "--out-dir", out, "--seed", "1"],
        catch_exceptions=False,
    )
    summary = json.loads(result.output)
    assert summary["rows_ingested"] == 400


def test_config_file_with_flag_override(cohort_csv, tmp_path):
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(f'input_csv = "{cohort_csv}"\nseed = 1\nknn_k = 7\n')
    out = str(tmp_path / "o")
    result = CliRunner().invoke(
        main,
        ["run", "--config", str(cfgfile), "--out-dir", out, "--seed", "9"],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    with open(os.path.join(out, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["seed"] == 9  # flag wins over the file
    assert manifest["config"]["knn_k"] == 7  # untouched file values survive


def test_unknown_config_key_fails_loudly(cohort_csv, tmp_path):
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(f'input_csv = "{cohort_csv}"\nseed = 1\nknn_q = 7\n')
    result = CliRunner().invoke(main, ["run", "--config", str(cfgfile), "--seed", "1"])
    assert result.exit_code != 0
    assert "knn_q" in str(result.exception)


def test_missing_input_reports_stage(tmp_path):
    result = CliRunner().invoke(
        main,
        ["run", "--input-csv", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path / "o"),
         "--seed", "1"],
    )
    assert result.exit_code != 0


class TestPredict:
    def _patient(self, full_run):
        with open(os.path.join(full_run, "bundle.json")) as fh:
            bundle = json.load(fh)
        return {name: bundle["background_mean"][name] for name in bundle["feature_names"]}

    def test_inline_values(self, full_run):
        patient = self._patient(full_run)
        args = ["predict", "--bundle", os.path.join(full_run, "bundle.json")]
        for name, value in patient.items():
            args += ["--value", f"{name}={value}"]
        result = CliRunner().invoke(main, args, catch_exceptions=False)
        assert result.exit_code == 0, result.output
        out = json.loads(result.output)
        assert sorted(out) == ["14", "28", "7"]
        for res in out.values():
            assert 0.0 < res["probability"] < 1.0
            assert abs(res["probability"] - res["probability_from_points"]) < 1e-6

    def test_patient_file_and_value_override_agree(self, full_run, tmp_path):
        patient = self._patient(full_run)
        pfile = tmp_path / "patient.json"
        pfile.write_text(json.dumps(patient))
        bundle_arg = ["--bundle", os.path.join(full_run, "bundle.json")]
        from_file = CliRunner().invoke(
            main, ["predict"] + bundle_arg + ["--patient", str(pfile)], catch_exceptions=False
        )
        inline = ["predict"] + bundle_arg
        for name, value in patient.items():
            inline += ["--value", f"{name}={value!r}"]
        assert from_file.exit_code == 0
        parsed = json.loads(from_file.output)
        assert parsed["7"]["total_points"] == sum(parsed["7"]["points"].values())

    def test_missing_feature_is_a_clean_error(self, full_run):
        result = CliRunner().invoke(
            main,
            ["predict", "--bundle", os.path.join(full_run, "bundle.json"),
             "--value", "definitely_not_a_feature=1.0"],
        )
        assert result.exit_code != 0
        assert "Error" in result.output and "Traceback" not in result.output

    def test_malformed_value_pair(self, full_run):
        result = CliRunner().invoke(
            main,
            ["predict", "--bundle", os.path.join(full_run, "bundle.json"), "--value", "oops"],
        )
        assert result.exit_code != 0
        assert "name=value" in result.output
