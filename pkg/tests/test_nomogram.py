"""Point-scale construction, patient scoring, SVG rendering, bundle export."""

import json
import math
import re

import numpy as np
import pytest

from icurisk.errors import DegenerateRange, IncompleteBundle, MissingFeature
from icurisk.model import fit_logistic, logit_of, predict_prob
from icurisk.nomogram import (
    NomogramSpec,
    build_nomogram,
    export_bundle,
    load_bundle,
    model_digest,
    probability_at,
    render_svg,
    score_patient,
)
from icurisk.preprocess import FeatureMatrix, zscore_fit_transform

NAMES = ["lactate", "age", "platelets"]
RANGES = {"lactate": (0.5, 15.0), "age": (18.0, 90.0), "platelets": (5.0, 400.0)}


def fit_model(seed=0, horizon=7):
    rng = np.random.default_rng(seed)
    x = np.column_stack(
        [
            rng.uniform(0.5, 15.0, 800),
            rng.uniform(18.0, 90.0, 800),
            rng.uniform(5.0, 400.0, 800),
        ]
    )
    z = (x - x.mean(axis=0)) / x.std(axis=0, ddof=1)
    logit = -2.0 + 1.4 * z[:, 0] + 0.6 * z[:, 1] - 0.9 * z[:, 2]
    labels = (rng.random(800) < 1.0 / (1.0 + np.exp(-logit))).astype(float)
    m = FeatureMatrix(
        values=x,
        missing_mask=np.zeros(x.shape, dtype=bool),
        names=list(NAMES),
        units=["mmol/L", "years", "10^9/L"],
    )
    model = fit_logistic(zscore_fit_transform(m), labels)
    model.horizon_days = horizon
    return model


@pytest.fixture(scope="module")
def model():
    return fit_model()


@pytest.fixture(scope="module")
def spec(model):
    return build_nomogram(model, RANGES, units={"lactate": "mmol/L"})


def random_patients(n, seed=1):
    rng = np.random.default_rng(seed)
    return [
        {nm: float(rng.uniform(lo, hi)) for nm, (lo, hi) in RANGES.items()}
        for _ in range(n)
    ]


class TestBuild:
    def test_widest_axis_spans_hundred_points(self, spec):
        assert max(a.span for a in spec.axes) == 100.0
        assert all(0.0 <= a.span <= 100.0 for a in spec.axes)

    def test_negative_coefficient_axis_reversed(self, model, spec):
        by_name = {a.name: a for a in spec.axes}
        for name, axis in by_name.items():
            beta = model.coefficients[model.feature_names.index(name)]
            assert axis.direction == (1 if beta >= 0 else -1)
            lo_pts, hi_pts = axis.points(axis.lo), axis.points(axis.hi)
            if axis.direction > 0:
                assert (lo_pts, hi_pts) == (0.0, axis.span)
            else:
                assert (lo_pts, hi_pts) == (axis.span, 0.0)

    def test_point_total_reproduces_logit(self, model, spec):
        for patient in random_patients(200):
            score = score_patient(spec, patient)
            reconstructed = spec.l0 + spec.alpha * score.total
            assert reconstructed == pytest.approx(
                logit_of(model, patient), abs=1e-9
            )

    def test_missing_range_rejected(self, model):
        with pytest.raises(DegenerateRange, match="platelets"):
            build_nomogram(model, {"lactate": (0.5, 15.0), "age": (18.0, 90.0)})

    def test_empty_range_rejected(self, model):
        bad = dict(RANGES, age=(50.0, 50.0))
        with pytest.raises(DegenerateRange):
            build_nomogram(model, bad)

    def test_probability_table_covers_error_bound(self, spec):
        # linear interpolation of a sigmoid is within 1e-6 when logit
        # steps stay under sqrt(8e-6 / max |sigmoid''|)
        assert len(spec.prob_points) >= 1001
        step = spec.alpha * (spec.prob_points[1] - spec.prob_points[0])
        assert step <= 9.12e-3

    def test_zero_coefficient_axis_is_flat(self, model):
        clone = type(model).from_dict(model.to_dict())
        clone.coefficients[1] = 0.0
        spec = build_nomogram(clone, RANGES)
        assert {a.name: a.flat for a in spec.axes}["age"] is True


class TestScorePatient:
    def test_out_of_range_clamps_with_flag(self, spec):
        patient = {"lactate": 99.0, "age": 40.0, "platelets": 100.0}
        score = score_patient(spec, patient)
        assert score.clamped == ["lactate"]
        capped = dict(RANGES)["lactate"][1]
        assert score.points["lactate"] == score_patient(
            spec, dict(patient, lactate=capped)
        ).points["lactate"]

    def test_missing_or_nonfinite_value(self, spec):
        with pytest.raises(MissingFeature, match="age"):
            score_patient(spec, {"lactate": 1.0, "platelets": 10.0})
        with pytest.raises(MissingFeature, match="lactate"):
            score_patient(spec, {"lactate": math.nan, "age": 40.0, "platelets": 10.0})

    def test_vector_form_matches_dict(self, spec):
        patient = {"lactate": 3.0, "age": 60.0, "platelets": 150.0}
        v = [patient[a.name] for a in spec.axes]
        assert score_patient(spec, v).total == score_patient(spec, patient).total

    def test_total_is_sum_of_axis_points(self, spec):
        score = score_patient(spec, {"lactate": 3.0, "age": 60.0, "platelets": 150.0})
        assert score.total == pytest.approx(sum(score.points.values()), abs=0)


class TestProbability:
    def test_interpolation_matches_sigmoid(self, model, spec):
        for patient in random_patients(300, seed=5):
            score = score_patient(spec, patient)
            assert probability_at(spec, score.total) == pytest.approx(
                predict_prob(model, patient), abs=1e-6
            )

    def test_monotone_in_points(self, spec):
        totals = np.linspace(0.0, spec.total_points_max, 50)
        probs = [probability_at(spec, t) for t in totals]
        assert probs == sorted(probs)


class TestSvg:
    def test_deterministic_and_structured(self, spec):
        svg = render_svg(spec)
        assert svg == render_svg(spec)
        assert svg.startswith("<svg")
        assert svg.count('class="feature-axis"') == 3
        assert svg.count('class="scale-axis"') == 3
        # coordinates rendered at fixed precision, no timestamps
        assert not re.search(r"\d{4}-\d{2}-\d{2}", svg)
        assert re.search(r'x1="\d+\.\d{2}"', svg)

    def test_rebuilt_spec_renders_identically(self, spec):
        clone = NomogramSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert render_svg(clone) == render_svg(spec)


class TestDigest:
    def test_stable_and_sensitive(self, model):
        assert model_digest(model) == model_digest(model)
        clone = type(model).from_dict(model.to_dict())
        clone.coefficients[0] += 1e-9
        assert model_digest(clone) != model_digest(model)


class TestBundle:
    @pytest.fixture()
    def pieces(self):
        models = {h: fit_model(seed=h, horizon=h) for h in (7, 14, 28)}
        specs = {h: build_nomogram(models[h], RANGES) for h in (7, 14, 28)}
        background = {"lactate": 4.0, "age": 55.0, "platelets": 180.0}
        return models, specs, background

    def test_roundtrip(self, pieces, tmp_path):
        models, specs, background = pieces
        path = tmp_path / "bundle.json"
        svgs = {7: render_svg(specs[7])}
        out = export_bundle(models, specs, path, background, svgs=svgs,
                            provenance={"seed": 1})
        back = load_bundle(path)
        assert back == out
        assert back["schema_version"] == 1
        assert back["feature_names"] == NAMES
        assert "svg" in back["horizons"]["7"]
        assert "svg" not in back["horizons"]["14"]
        entry = back["horizons"]["14"]
        assert entry["coefficients"] == [float(c) for c in models[14].coefficients]

    def test_missing_horizon_rejected_on_export(self, pieces, tmp_path):
        models, specs, background = pieces
        del models[14]
        with pytest.raises(IncompleteBundle, match="14"):
            export_bundle(models, specs, tmp_path / "b.json", background)

    def test_missing_background_rejected(self, pieces, tmp_path):
        models, specs, background = pieces
        del background["age"]
        with pytest.raises(IncompleteBundle, match="age"):
            export_bundle(models, specs, tmp_path / "b.json", background)

    def test_load_rejects_schema_and_horizon_gaps(self, pieces, tmp_path):
        models, specs, background = pieces
        path = tmp_path / "bundle.json"
        bundle = export_bundle(models, specs, path, background)

        wrong = dict(bundle, schema_version=99)
        bad = tmp_path / "wrong_schema.json"
        bad.write_text(json.dumps(wrong))
        with pytest.raises(IncompleteBundle, match="schema_version"):
            load_bundle(bad)

        horizons = dict(bundle["horizons"])
        del horizons["28"]
        gap = tmp_path / "gap.json"
        gap.write_text(json.dumps(dict(bundle, horizons=horizons)))
        with pytest.raises(IncompleteBundle, match="28"):
            load_bundle(gap)
