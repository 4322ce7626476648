"""End-to-end orchestration: stage functions over persisted intermediates.

Every stage reads its inputs from the artifacts directory and writes
deterministic outputs there, so stages can be re-run individually and a
full run is just the stages in order. One master seed fans out to
per-stage substreams through a fixed index map:

    0 split, 1 resample, 2 bootstrap CI, 3 permutation importance

Stage order follows the published pipeline: imputation runs cohort-wide
before the split; z-scoring, selection, and SMOTE use the training side
only; evaluation uses the untouched test side.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import _kernels, dataio
from .cohort import (
    DataDictionary,
    DictionaryEntry,
    SurvivalOutcome,
    apply_inclusion,
    derive_outcome,
    load_cohort,
    write_cohort_csv,
)
from .errors import ConfigError, DegenerateSample, MissingFeature
from .evaluate import (
    MetricReport,
    auroc,
    bootstrap_ci,
    c_index,
    calibration_curve,
    confusion_at,
    pr_auc,
    pr_points,
    roc_points,
    welch_t_test,
)
from .explain import (
    attribution_from_background_mean,
    permutation_importance,
    summary_distribution,
)
from .model import (
    CoxModel,
    LogisticModel,
    _sigmoid,
    binarize_outcome,
    fit_cox,
    fit_logistic,
    predict_prob,
)
from .nomogram import (
    NomogramSpec,
    build_nomogram,
    export_bundle,
    probability_at,
    render_svg,
    score_patient,
)
from .preprocess import (
    FeatureMatrix,
    NormStats,
    drop_high_missingness,
    knn_impute,
    zscore_fit_transform,
)
from .resample import SmoteConfig, smote_augment, substream
from .select import two_stage_select

STAGE_SPLIT = 0
STAGE_SMOTE = 1
STAGE_BOOTSTRAP = 2
STAGE_PERMUTATION = 3


def stage_seed(master_seed: int, stage_index: int) -> int:
    """64-bit sub-seed for a stage, independent of other stages."""
    ss = substream(master_seed, stage_index)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class PipelineConfig:
    input_csv: str = ""
    out_dir: str = "artifacts"
    seed: int | None = None
    dictionary_json: str | None = None
    split_ratio: float = 0.7
    horizons: tuple[int, ...] = (7, 14, 28)
    knn_k: int = 5
    missing_threshold: float = 0.8
    k_best: int = 50
    n_target: int = 7
    force_include: tuple[str, ...] = ()
    force_exclude: tuple[str, ...] = ()
    vif_threshold: float = 5.0
    smote_thresholds: tuple[float, ...] = (7.0, 35.0)
    smote_weights: tuple[float, ...] = (40.0, 20.0, 1.0)
    smote_n_synthetic: int = 2000
    smote_k_neighbors: int = 5
    smote_noise_delta: float | None = None
    smote_pool_size: int | None = None
    bootstrap_replicates: int = 2000
    ci_level: float = 0.95
    class_threshold: float = 0.5
    permutation_repeats: int = 20
    range_percentiles: tuple[float, float] = (1.0, 99.0)
    min_age: float = 18.0
    max_age: float = 90.0
    min_icu_days: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.split_ratio < 1.0):
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        self.horizons = tuple(int(h) for h in self.horizons)
        if not self.horizons or list(self.horizons) != sorted(set(self.horizons)):
            raise ConfigError("horizons must be nonempty and strictly ascending")
        if any(h <= 0 for h in self.horizons):
            raise ConfigError("horizons must be positive")
        if self.seed is None:
            raise ConfigError("seed is required")
        self.seed = int(self.seed)
        lo, hi = self.range_percentiles
        if not (0.0 <= lo < hi <= 100.0):
            raise ConfigError("range_percentiles must satisfy 0 <= lo < hi <= 100")

    @property
    def window_days(self) -> float:
        return float(max(self.horizons))

    def smote_config(self) -> SmoteConfig:
        return SmoteConfig(
            thresholds=self.smote_thresholds,
            weights=self.smote_weights,
            n_synthetic=self.smote_n_synthetic,
            k_neighbors=self.smote_k_neighbors,
            noise_delta=self.smote_noise_delta,
            seed=stage_seed(self.seed, STAGE_SMOTE),
            pool_size=self.smote_pool_size,
        )

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    _PATH_FIELDS = ("input_csv", "out_dir", "dictionary_json")

    def science_dict(self):
        """Config without filesystem locations; the unit of provenance."""
        return {k: v for k, v in self.to_dict().items() if k not in self._PATH_FIELDS}

    @classmethod
    def from_dict(cls, raw):
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        coerced = dict(raw)
        for key in (
            "horizons",
            "force_include",
            "force_exclude",
            "smote_thresholds",
            "smote_weights",
            "range_percentiles",
        ):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        return cls(**coerced)

    @classmethod
    def from_file(cls, path, overrides=None):
        if str(path).endswith(".toml"):
            try:
                import tomllib
            except ImportError:  # Python < 3.11
                import tomli as tomllib

            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            raw = dataio.read_json(path)
        raw.update(overrides or {})
        return cls.from_dict(raw)

    def digest(self) -> str:
        return dataio.sha256_of(self.science_dict())


class Paths:
    """Fixed artifact names inside the output directory."""

    def __init__(self, out_dir):
        self.out_dir = out_dir

    def __getattr__(self, name):
        table = {
            "dictionary": "dictionary.json",
            "cohort": "cohort.csv",
            "cohort_included": "cohort_included.csv",
            "exclusion_report": "exclusion_report.json",
            "outcomes": "outcomes.csv",
            "matrix": "matrix_imputed.csv",
            "preprocess_meta": "preprocess_meta.json",
            "split": "split.json",
            "selection": "selection.json",
            "z_stats": "z_stats.json",
            "train_augmented": "train_augmented.csv",
            "comparison": "comparison.json",
            "bundle": "bundle.json",
            "manifest": "manifest.json",
        }
        if name in table:
            return os.path.join(self.out_dir, table[name])
        raise AttributeError(name)

    def model(self, horizon):
        return os.path.join(self.out_dir, f"model_{horizon}d.json")

    def model_cox(self):
        return os.path.join(self.out_dir, "model_cox.json")

    def metrics(self, horizon):
        return os.path.join(self.out_dir, f"metrics_{horizon}d.json")

    def metrics_cox(self):
        return os.path.join(self.out_dir, "metrics_cox.json")

    def curve(self, kind, horizon):
        return os.path.join(self.out_dir, f"{kind}_{horizon}d.csv")

    def permutation(self, horizon):
        return os.path.join(self.out_dir, f"permutation_{horizon}d.json")

    def attributions(self, horizon):
        return os.path.join(self.out_dir, f"attributions_{horizon}d.csv")

    def svg(self, horizon):
        return os.path.join(self.out_dir, f"nomogram_{horizon}d.svg")


# --- matrix / outcome persistence ----------------------------------------------


def _write_matrix(ids, m: FeatureMatrix, path):
    rows = []
    for i, sid in enumerate(ids):
        row = [sid]
        for j in range(len(m.names)):
            row.append("" if m.missing_mask[i, j] else float(m.values[i, j]))
        rows.append(row)
    dataio.write_csv(["subject_id"] + list(m.names), rows, path)


def _read_matrix(path, units=None):
    header, rows = dataio.read_csv(path)
    names = header[1:]
    ids = [r[0] for r in rows]
    values = np.full((len(rows), len(names)), np.nan)
    mask = np.ones((len(rows), len(names)), dtype=bool)
    for i, r in enumerate(rows):
        for j, cell in enumerate(r[1:]):
            if cell != "":
                values[i, j] = float(cell)
                mask[i, j] = False
    m = FeatureMatrix(
        values=values,
        missing_mask=mask,
        names=names,
        units=[units.get(nm, "") for nm in names] if units else [],
    )
    return ids, m


def _write_outcomes(ids, outcomes, path):
    rows = [
        [sid, float(o.time_days), 1 if o.event else 0]
        for sid, o in zip(ids, outcomes)
    ]
    dataio.write_csv(["subject_id", "time_days", "event"], rows, path)


def _read_outcomes(path):
    _, rows = dataio.read_csv(path)
    ids = [r[0] for r in rows]
    outcomes = [
        SurvivalOutcome(time_days=float(r[1]), event=r[2] == "1") for r in rows
    ]
    return ids, outcomes


def _infer_dictionary(csv_path) -> DataDictionary:
    """Treat every non-mandatory header column as a unitless feature."""
    from .cohort import MANDATORY_COLUMNS, OPTIONAL_COLUMNS

    header, _ = dataio.read_csv(csv_path)
    skip = set(MANDATORY_COLUMNS) | set(OPTIONAL_COLUMNS)
    return DataDictionary(
        entries=[DictionaryEntry(name=c) for c in header if c not in skip]
    )


# --- stages ---------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig):
    """Validate the input CSV against the dictionary; persist both."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.dictionary_json:
        dictionary = DataDictionary.from_json(cfg.dictionary_json)
    else:
        dictionary = _infer_dictionary(cfg.input_csv)
    table = load_cohort(cfg.input_csv, dictionary)
    paths = Paths(cfg.out_dir)
    dictionary.to_json(paths.dictionary)
    write_cohort_csv(table, paths.cohort)
    return {"rows_ingested": len(table), "columns": len(dictionary.names)}


def stage_filter(cfg: PipelineConfig):
    """Apply inclusion criteria; derive time-to-event outcomes."""
    paths = Paths(cfg.out_dir)
    dictionary = DataDictionary.from_json(paths.dictionary)
    table = load_cohort(paths.cohort, dictionary)
    included, report = apply_inclusion(
        table,
        min_age=cfg.min_age,
        max_age=cfg.max_age,
        min_icu_days=cfg.min_icu_days,
    )
    write_cohort_csv(included, paths.cohort_included)
    report.to_json(paths.exclusion_report)
    outcomes = [derive_outcome(rec, cfg.window_days) for rec in included.records]
    ids = [rec.subject_id for rec in included.records]
    _write_outcomes(ids, outcomes, paths.outcomes)
    return {"rows_after_inclusion": len(included), "excluded": report.counts}


def stage_preprocess(cfg: PipelineConfig):
    """Drop high-missingness columns, KNN-impute the rest, persist the matrix."""
    paths = Paths(cfg.out_dir)
    dictionary = DataDictionary.from_json(paths.dictionary)
    table = load_cohort(paths.cohort_included, dictionary)
    m = FeatureMatrix.from_cohort(table)
    kept, dropped = drop_high_missingness(m, cfg.missing_threshold)
    imputed = knn_impute(kept, cfg.knn_k)
    ids = [rec.subject_id for rec in table.records]
    _write_matrix(ids, imputed, paths.matrix)
    dataio.write_json(
        {
            "dropped_columns": dropped,
            "missing_threshold": cfg.missing_threshold,
            "knn_k": cfg.knn_k,
            "columns_kept": list(kept.names),
        },
        paths.preprocess_meta,
    )
    return {"columns_dropped": dropped, "columns_kept": len(kept.names)}


def stage_split(cfg: PipelineConfig):
    """Stratified train/test split on the longest-horizon label."""
    paths = Paths(cfg.out_dir)
    ids, m = _read_matrix(paths.matrix)
    out_ids, outcomes = _read_outcomes(paths.outcomes)
    if ids != out_ids:
        raise ConfigError("matrix and outcomes row order disagree")
    label = binarize_outcome(outcomes, cfg.window_days)
    train_idx, test_idx = stratified_split(
        label, cfg.split_ratio, stage_seed(cfg.seed, STAGE_SPLIT)
    )
    dataio.write_json(
        {
            "ratio": cfg.split_ratio,
            "stratify_horizon_days": cfg.window_days,
            "train": [int(i) for i in train_idx],
            "test": [int(i) for i in test_idx],
        },
        paths.split,
    )
    return {"rows_train": len(train_idx), "rows_test": len(test_idx)}


def stratified_split(labels, ratio, seed):
    """Per-class shuffles, `ratio` of each class to train; indices ascending."""
    labels = np.asarray(labels, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    train = []
    for value in (0.0, 1.0):
        idx = np.flatnonzero(labels == value)
        if idx.size == 0:
            continue
        perm = idx[rng.permutation(idx.size)]
        n_train = int(round(ratio * idx.size))
        if idx.size >= 2:
            n_train = min(max(n_train, 1), idx.size - 1)
        train.append(perm[:n_train])
    train_idx = np.sort(np.concatenate(train))
    mask = np.ones(labels.size, dtype=bool)
    mask[train_idx] = False
    return train_idx, np.flatnonzero(mask)


def _load_split(paths):
    ids, m = _read_matrix(paths.matrix)
    _, outcomes = _read_outcomes(paths.outcomes)
    split = dataio.read_json(paths.split)
    train_idx = np.asarray(split["train"], dtype=np.intp)
    test_idx = np.asarray(split["test"], dtype=np.intp)
    return ids, m, outcomes, train_idx, test_idx


def stage_select(cfg: PipelineConfig):
    """Two-stage selection with VIF screen, on the training side only."""
    paths = Paths(cfg.out_dir)
    _, m, outcomes, train_idx, _ = _load_split(paths)
    label = binarize_outcome(outcomes, cfg.window_days)[train_idx]
    z_train = zscore_fit_transform(m.take_rows(train_idx))
    result = two_stage_select(
        z_train,
        label,
        k_best=cfg.k_best,
        n_target=cfg.n_target,
        force_include=cfg.force_include,
        force_exclude=cfg.force_exclude,
        vif_threshold=cfg.vif_threshold,
    )
    dataio.write_json(
        {
            "f_test": result["f_test"].to_dict(),
            "rfe": result["rfe"].to_dict(),
            "vif": result["vif"].to_dict() if result["vif"] else None,
            "vif_dropped": result["vif_dropped"],
            "selected": result["selected"],
        },
        paths.selection,
    )
    return {"selected": result["selected"]}


def stage_resample(cfg: PipelineConfig):
    """SMOTE on the z-scored selected training matrix; targets are event times."""
    paths = Paths(cfg.out_dir)
    _, m, outcomes, train_idx, _ = _load_split(paths)
    selected = dataio.read_json(paths.selection)["selected"]

    train_raw = m.take_rows(train_idx).subset(selected)
    z_train = zscore_fit_transform(train_raw)
    dataio.write_json(z_train.norm_stats.to_dict(), paths.z_stats)

    y_time = np.array([outcomes[i].time_days for i in train_idx])
    aug, y_aug = smote_augment(z_train, y_time, cfg.smote_config())

    n_orig = len(train_idx)
    events = [outcomes[i].event for i in train_idx]
    rows = []
    for i in range(aug.shape[0]):
        synthetic = i >= n_orig
        if synthetic:
            # synthetic targets: death iff the interpolated time falls
            # strictly inside the window; survivors sit at the boundary
            t = float(y_aug[i])
            event = t < cfg.window_days
            t = min(max(t, 1e-6), cfg.window_days)
        else:
            t = float(y_aug[i])
            event = bool(events[i])
        rows.append(
            [*(float(v) for v in aug.values[i]), t, 1 if event else 0, 1 if synthetic else 0]
        )
    dataio.write_csv(
        list(aug.names) + ["time_days", "event", "synthetic"],
        rows,
        paths.train_augmented,
    )
    return {"rows_train": n_orig, "rows_after_smote": aug.shape[0]}


def _read_augmented(paths):
    header, rows = dataio.read_csv(paths.train_augmented)
    names = header[:-3]
    values = np.array([[float(c) for c in r[:-3]] for r in rows])
    outcomes = [
        SurvivalOutcome(time_days=float(r[-3]), event=r[-2] == "1") for r in rows
    ]
    stats = NormStats.from_dict(dataio.read_json(paths.z_stats))
    m = FeatureMatrix(
        values=values,
        missing_mask=np.zeros_like(values, dtype=bool),
        names=list(names),
        norm_stats=stats,
    )
    return m, outcomes


def stage_train(cfg: PipelineConfig):
    """Fit one logistic model per horizon plus the Cox model, all on
    the augmented training data; persist JSONs with prediction extras."""
    paths = Paths(cfg.out_dir)
    aug, aug_outcomes = _read_augmented(paths)
    _, m, _, train_idx, _ = _load_split(paths)
    selected = list(aug.names)
    train_raw = m.take_rows(train_idx).subset(selected)
    dictionary = DataDictionary.from_json(paths.dictionary)
    unit_by_name = {e.name: e.unit for e in dictionary.entries}

    lo_p, hi_p = cfg.range_percentiles
    ranges = {}
    for j, name in enumerate(selected):
        col = train_raw.values[:, j]
        lo, hi = float(np.quantile(col, lo_p / 100.0)), float(np.quantile(col, hi_p / 100.0))
        if not lo < hi:
            lo, hi = float(col.min()), float(col.max())
        ranges[name] = (lo, hi)
    background_mean = {
        name: float(train_raw.values[:, j].mean()) for j, name in enumerate(selected)
    }
    extras = {
        "feature_ranges": {nm: [ranges[nm][0], ranges[nm][1]] for nm in selected},
        "background_mean": background_mean,
        "units": {nm: unit_by_name.get(nm, "") for nm in selected},
        "provenance": {"config_sha256": cfg.digest(), "seed": cfg.seed},
    }

    for horizon in cfg.horizons:
        labels = binarize_outcome(aug_outcomes, horizon)
        model = fit_logistic(aug, labels)
        model.horizon_days = int(horizon)
        dataio.write_json({**model.to_dict(), **extras}, paths.model(horizon))

    cox = fit_cox(aug, aug_outcomes)
    dataio.write_json({**cox.to_dict(), **extras}, paths.model_cox())
    return {"horizons": list(cfg.horizons), "features": selected}


def _test_matrices(cfg, paths):
    _, m, outcomes, train_idx, test_idx = _load_split(paths)
    selected = dataio.read_json(paths.selection)["selected"]
    test_raw = m.take_rows(test_idx).subset(selected)
    test_outcomes = [outcomes[i] for i in test_idx]
    return test_raw, test_outcomes


def stage_evaluate(cfg: PipelineConfig):
    """Metric reports and curve CSVs on the untouched test split."""
    paths = Paths(cfg.out_dir)
    test_raw, test_outcomes = _test_matrices(cfg, paths)
    boot_seed = stage_seed(cfg.seed, STAGE_BOOTSTRAP)

    summary = {}
    for horizon in cfg.horizons:
        model = LogisticModel.from_dict(dataio.read_json(paths.model(horizon)))
        scores = np.array(
            [predict_prob(model, test_raw.values[i]) for i in range(test_raw.shape[0])]
        )
        labels = binarize_outcome(test_outcomes, horizon)
        lower, upper = bootstrap_ci(
            scores,
            labels,
            B=cfg.bootstrap_replicates,
            level=cfg.ci_level,
            seed=boot_seed,
        )
        sens, spec, _, _ = confusion_at(scores, labels, cfg.class_threshold)
        report = MetricReport(
            horizon_days=int(horizon),
            auroc=auroc(scores, labels),
            auroc_ci=(lower, upper, cfg.ci_level),
            pr_auc=pr_auc(scores, labels),
            sensitivity=sens,
            specificity=spec,
            threshold=cfg.class_threshold,
            n_test=int(labels.size),
            n_events=int(labels.sum()),
            ci_replicates=cfg.bootstrap_replicates,
        )
        dataio.write_json(report.to_dict(), paths.metrics(horizon))
        dataio.write_csv(
            ["fpr", "tpr", "threshold"],
            roc_points(scores, labels),
            paths.curve("roc", horizon),
        )
        dataio.write_csv(
            ["recall", "precision", "threshold"],
            pr_points(scores, labels),
            paths.curve("pr", horizon),
        )
        dataio.write_csv(
            ["mean_pred", "observed_rate", "n"],
            calibration_curve(scores, labels),
            paths.curve("calibration", horizon),
        )
        summary[horizon] = report.auroc

    cox = CoxModel.from_dict(dataio.read_json(paths.model_cox()))
    z = (test_raw.values - cox.norm_stats.mean) / cox.norm_stats.sd
    risk = z @ cox.coefficients
    events = sum(1 for o in test_outcomes if o.event)
    dataio.write_json(
        {
            "c_index": c_index(risk, test_outcomes),
            "n_test": len(test_outcomes),
            "n_events": events,
        },
        paths.metrics_cox(),
    )

    _write_group_comparison(cfg, paths)
    return {"auroc": summary}


def _write_group_comparison(cfg, paths):
    """Per-feature survivor vs. non-survivor contrast on the full cohort."""
    _, m, outcomes, _, _ = _load_split(paths)
    selected = dataio.read_json(paths.selection)["selected"]
    label = binarize_outcome(outcomes, cfg.window_days)
    sub = m.subset(selected)
    rows = {}
    for j, name in enumerate(selected):
        died = sub.values[label == 1.0, j]
        lived = sub.values[label == 0.0, j]
        entry = {
            "mean_died": float(died.mean()) if died.size else None,
            "mean_survived": float(lived.mean()) if lived.size else None,
        }
        try:
            t, df, p = welch_t_test(died, lived)
            entry.update({"t": t, "df": df, "p": p})
        except DegenerateSample:
            entry.update({"t": None, "df": None, "p": None})
        rows[name] = entry
    dataio.write_json(rows, paths.comparison)


def stage_explain(cfg: PipelineConfig):
    """Permutation importance and attribution summaries per horizon."""
    paths = Paths(cfg.out_dir)
    test_raw, test_outcomes = _test_matrices(cfg, paths)
    _, m, _, train_idx, _ = _load_split(paths)
    selected = list(test_raw.names)
    background = m.take_rows(train_idx).subset(selected)
    perm_seed = stage_seed(cfg.seed, STAGE_PERMUTATION)

    for horizon in cfg.horizons:
        model = LogisticModel.from_dict(dataio.read_json(paths.model(horizon)))
        labels = binarize_outcome(test_outcomes, horizon)
        report = permutation_importance(
            model, test_raw, labels, n_repeats=cfg.permutation_repeats, seed=perm_seed
        )
        dataio.write_json(report.to_dict(), paths.permutation(horizon))
        matrix, ranked_names, ranked_values = summary_distribution(
            model, test_raw, background
        )
        dataio.write_csv(
            list(model.feature_names),
            [[float(v) for v in row] for row in matrix],
            paths.attributions(horizon),
        )
        dataio.write_json(
            {"ranking": ranked_names, "mean_abs_attribution": ranked_values},
            os.path.join(cfg.out_dir, f"attribution_ranking_{horizon}d.json"),
        )
    return {"permutation_repeats": cfg.permutation_repeats}


def stage_nomogram(cfg: PipelineConfig):
    """Nomogram SVG per horizon and the consolidated UI bundle."""
    paths = Paths(cfg.out_dir)
    models, specs, svgs = {}, {}, {}
    units = {}
    background_mean = {}
    provenance = {}
    for horizon in cfg.horizons:
        raw = dataio.read_json(paths.model(horizon))
        model = LogisticModel.from_dict(raw)
        ranges = {nm: tuple(v) for nm, v in raw["feature_ranges"].items()}
        units = raw["units"]
        background_mean = raw["background_mean"]
        provenance = raw["provenance"]
        spec = build_nomogram(model, ranges, units=units)
        svg = render_svg(spec)
        with open(paths.svg(horizon), "w", encoding="utf-8") as fh:
            fh.write(svg)
        models[horizon], specs[horizon], svgs[horizon] = model, spec, svg

    export_bundle(
        models,
        specs,
        paths.bundle,
        background_mean=background_mean,
        units=units,
        svgs=svgs,
        provenance=provenance,
    )
    return {"bundle": os.path.basename(paths.bundle)}


def run_pipeline(cfg: PipelineConfig) -> str:
    """All stages in order, plus the reproducibility manifest."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    stages = [
        ("ingest", stage_ingest),
        ("filter", stage_filter),
        ("preprocess", stage_preprocess),
        ("split", stage_split),
        ("select", stage_select),
        ("resample", stage_resample),
        ("train", stage_train),
        ("evaluate", stage_evaluate),
        ("explain", stage_explain),
        ("nomogram", stage_nomogram),
    ]
    shapes = {}
    for name, fn in stages:
        try:
            shapes[name] = fn(cfg)
        except Exception as e:
            raise type(e)(f"stage '{name}': {e}") from e

    with open(cfg.input_csv, "rb") as fh:
        input_sha = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "config": cfg.science_dict(),
        "config_sha256": cfg.digest(),
        "input_sha256": input_sha,
        "seed": cfg.seed,
        "stage_seed_map": {
            "split": STAGE_SPLIT,
            "resample": STAGE_SMOTE,
            "bootstrap": STAGE_BOOTSTRAP,
            "permutation": STAGE_PERMUTATION,
        },
        "package_version": __version__,
        "kernel_backend": _kernels.BACKEND,
        "stages": shapes,
    }
    paths = Paths(cfg.out_dir)
    dataio.write_json(manifest, paths.manifest)
    return cfg.out_dir


# --- bundle-side prediction -------------------------------------------------------


def predict_from_bundle(bundle: dict, patient: dict) -> dict:
    """Per-horizon probability, point breakdown, and attributions.

    Reference implementation of the arithmetic the UI mirrors: z-score,
    logit, clamped sigmoid, axis points, and background-relative
    attributions, all straight from bundle fields.
    """
    names = bundle["feature_names"]
    absent = [nm for nm in names if nm not in patient or patient[nm] is None]
    if absent:
        raise MissingFeature(f"missing values for {absent}")
    x = np.array([float(patient[nm]) for nm in names])

    out = {}
    for key in sorted(bundle["horizons"], key=int):
        entry = bundle["horizons"][key]
        mean = np.asarray(entry["norm_mean"])
        sd = np.asarray(entry["norm_sd"])
        coef = np.asarray(entry["coefficients"])
        z = (x - mean) / sd
        logit = float(entry["intercept"] + z @ coef)
        prob = float(min(max(_sigmoid(logit), 1e-15), 1.0 - 1e-15))

        spec = NomogramSpec.from_dict(entry["nomogram"])
        score = score_patient(spec, {nm: float(patient[nm]) for nm in names})

        bg = np.array([bundle["background_mean"][nm] for nm in names])
        z_bar = (bg - mean) / sd
        attr, base = attribution_from_background_mean(
            entry["intercept"], coef, mean, sd, z_bar, x
        )
        out[key] = {
            "probability": prob,
            "probability_from_points": probability_at(spec, score.total),
            "total_points": score.total,
            "points": score.points,
            "clamped": score.clamped,
            "attributions": {nm: float(a) for nm, a in zip(names, attr)},
            "base_value": base,
        }
    return out
