"""Missingness filtering, KNN imputation, z-scoring, derived clinical scores."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import _kernels
from .errors import ConstantColumn, InsufficientDonors, OutOfPhysiologicRange

APS_VARIABLES = (
    "heart_rate",
    "mean_arterial_pressure",
    "temperature",
    "respiratory_rate",
    "pao2_fio2",
    "ph",
    "sodium",
    "potassium",
    "glucose",
    "creatinine",
    "bun",
    "wbc",
    "hematocrit",
    "urine_output",
    "gcs",
    "reserved_1",
    "reserved_2",
)

APS_SCORE_MAX = 252.0


@dataclass
class NormStats:
    """Per-column mean and sample (n-1) standard deviation."""

    mean: np.ndarray
    sd: np.ndarray
    names: list[str]

    def to_dict(self):
        return {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "sd": [float(v) for v in self.sd],
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            mean=np.asarray(raw["mean"], dtype=np.float64),
            sd=np.asarray(raw["sd"], dtype=np.float64),
            names=list(raw["names"]),
        )


@dataclass
class FeatureMatrix:
    """Numeric matrix with missingness mask and per-column metadata.

    values[i, j] is meaningful only where missing_mask[i, j] is False;
    masked slots hold NaN.
    """

    values: np.ndarray
    missing_mask: np.ndarray
    names: list[str]
    units: list[str] = field(default_factory=list)
    norm_stats: NormStats | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != self.missing_mask.shape:
            raise ValueError("values and missing_mask shapes differ")
        if len(self.names) != self.values.shape[1]:
            raise ValueError("one name per column required")
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")
        if not self.units:
            self.units = [""] * len(self.names)
        self.values = self.values.copy()
        self.values[self.missing_mask] = np.nan

    @property
    def shape(self):
        return self.values.shape

    def missing_fraction(self):
        return self.missing_mask.mean(axis=0)

    def column(self, name):
        return self.values[:, self.names.index(name)]

    def subset(self, names):
        idx = [self.names.index(n) for n in names]
        return FeatureMatrix(
            values=self.values[:, idx],
            missing_mask=self.missing_mask[:, idx],
            names=[self.names[i] for i in idx],
            units=[self.units[i] for i in idx],
        )

    def take_rows(self, rows):
        return FeatureMatrix(
            values=self.values[rows],
            missing_mask=self.missing_mask[rows],
            names=list(self.names),
            units=list(self.units),
            norm_stats=self.norm_stats,
        )

    @classmethod
    def from_cohort(cls, table):
        """Build the matrix from CohortTable clinical values, dictionary order."""
        names = table.dictionary.names
        units = [e.unit for e in table.dictionary.entries]
        n, d = len(table.records), len(names)
        values = np.full((n, d), np.nan)
        mask = np.ones((n, d), dtype=bool)
        for i, rec in enumerate(table.records):
            for j, name in enumerate(names):
                v = rec.clinical_values.get(name)
                if v is not None:
                    values[i, j] = v
                    mask[i, j] = False
        return cls(values=values, missing_mask=mask, names=list(names), units=units)


def drop_high_missingness(
    m: FeatureMatrix, threshold: float = 0.8
) -> tuple[FeatureMatrix, list[str]]:
    """Drop columns whose missing fraction strictly exceeds the threshold."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must lie in (0, 1]")
    frac = m.missing_fraction()
    keep = [j for j in range(len(m.names)) if frac[j] <= threshold]
    dropped = [m.names[j] for j in range(len(m.names)) if frac[j] > threshold]
    kept = FeatureMatrix(
        values=m.values[:, keep],
        missing_mask=m.missing_mask[:, keep],
        names=[m.names[j] for j in keep],
        units=[m.units[j] for j in keep],
    )
    return kept, dropped


def knn_impute(m: FeatureMatrix, k: int = 5) -> FeatureMatrix:
    """Fill missing cells with the mean of the k nearest donor rows.

    Distance is the mean squared difference over columns observed in both
    rows after per-column sd scaling, so rows sharing few columns are not
    penalized for the shorter sum. Donors for a cell are the k nearest
    rows where that column is observed; observed cells pass through
    untouched.
    """
    if k < 1:
        raise ValueError("k must be positive")
    observed = ~m.missing_mask
    n, d = m.shape
    short = observed.sum(axis=0) < k
    if short.any():
        bad = [m.names[j] for j in np.flatnonzero(short)]
        raise InsufficientDonors(
            f"columns {bad} have fewer than k={k} observed rows"
        )
    empty_rows = np.flatnonzero(~observed.any(axis=1))
    if empty_rows.size:
        raise InsufficientDonors(
            f"rows {empty_rows.tolist()} have no observed values to match donors on"
        )
    if not m.missing_mask.any():
        return FeatureMatrix(
            values=m.values,
            missing_mask=np.zeros_like(m.missing_mask),
            names=list(m.names),
            units=list(m.units),
        )

    # Scale columns to unit sd for the distance; constant columns carry no
    # distance information so their scale is irrelevant (set to 1).
    scaled = np.array(m.values, dtype=np.float64)
    for j in range(d):
        col = m.values[observed[:, j], j]
        mu = col.mean()
        sd = col.std(ddof=1) if col.size > 1 else 0.0
        if sd == 0.0:
            sd = 1.0
        scaled[:, j] = (m.values[:, j] - mu) / sd
    scaled[m.missing_mask] = 0.0

    filled = _kernels.knn_impute(
        np.ascontiguousarray(m.values),
        np.ascontiguousarray(scaled),
        np.ascontiguousarray(observed),
        int(k),
    )
    return FeatureMatrix(
        values=filled,
        missing_mask=np.zeros((n, d), dtype=bool),
        names=list(m.names),
        units=list(m.units),
    )


def zscore_fit_transform(m: FeatureMatrix) -> FeatureMatrix:
    """Standardize each column to mean 0, sample sd 1; stats stored on the result."""
    if m.missing_mask.any():
        raise ValueError("z-scoring requires a fully imputed matrix")
    mean = m.values.mean(axis=0)
    sd = m.values.std(axis=0, ddof=1)
    flat = np.flatnonzero(sd == 0.0)
    if flat.size:
        raise ConstantColumn(
            f"columns {[m.names[j] for j in flat]} are constant; cannot standardize"
        )
    stats = NormStats(mean=mean, sd=sd, names=list(m.names))
    return FeatureMatrix(
        values=(m.values - mean) / sd,
        missing_mask=np.zeros_like(m.missing_mask),
        names=list(m.names),
        units=list(m.units),
        norm_stats=stats,
    )


def zscore_apply(m: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    """Standardize with previously fitted stats (test set uses train stats)."""
    if m.missing_mask.any():
        raise ValueError("z-scoring requires a fully imputed matrix")
    if list(stats.names) != list(m.names):
        raise ValueError("normalization stats were fitted on different columns")
    if np.any(stats.sd <= 0.0):
        raise ConstantColumn("normalization stats contain non-positive sd")
    return FeatureMatrix(
        values=(m.values - stats.mean) / stats.sd,
        missing_mask=np.zeros_like(m.missing_mask),
        names=list(m.names),
        units=list(m.units),
        norm_stats=stats,
    )


# --- derived clinical scores -------------------------------------------------


def load_weight_table(path=None) -> dict:
    """Load the acute-physiology weight table (packaged default if no path)."""
    if path is None:
        text = (
            resources.files("icurisk.data")
            .joinpath("aps_iii_weights.json")
            .read_text(encoding="utf-8")
        )
        table = json.loads(text)
    else:
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
    for name, var in table["variables"].items():
        for b in var["bins"]:
            if b["weight"] < 0:
                raise ValueError(f"negative weight in bin of '{name}'")
    return table


@dataclass
class ApsIiiInput:
    """One patient's worst-in-24h physiology plus the scoring table.

    Any variable may be None; missing variables score their configured
    default (0 = assumed normal).
    """

    weight_table: dict
    heart_rate: float | None = None
    mean_arterial_pressure: float | None = None
    temperature: float | None = None
    respiratory_rate: float | None = None
    pao2_fio2: float | None = None
    ph: float | None = None
    sodium: float | None = None
    potassium: float | None = None
    glucose: float | None = None
    creatinine: float | None = None
    bun: float | None = None
    wbc: float | None = None
    hematocrit: float | None = None
    urine_output: float | None = None
    gcs: float | None = None
    reserved_1: float | None = None
    reserved_2: float | None = None


def _bin_weight(value, var_spec):
    if value is None:
        return float(var_spec["default_weight"])
    for b in var_spec["bins"]:
        lo = -np.inf if b["lo"] is None else b["lo"]
        hi = np.inf if b["hi"] is None else b["hi"]
        if lo <= value < hi:
            return float(b["weight"])
    return float(var_spec["default_weight"])


def aps_iii_score(inp: ApsIiiInput) -> float:
    """Sum of per-variable bin weights, clamped to [0, 252]."""
    total = 0.0
    for name in APS_VARIABLES:
        var_spec = inp.weight_table["variables"][name]
        total += _bin_weight(getattr(inp, name), var_spec)
    return float(min(max(total, 0.0), APS_SCORE_MAX))


def base_excess(hco3: float, hb: float, ph: float) -> float:
    """Metabolic base excess from bicarbonate, hemoglobin, and pH."""
    if not hco3 > 0:
        raise OutOfPhysiologicRange(f"hco3 must be positive, got {hco3}")
    if hb < 0:
        raise OutOfPhysiologicRange(f"hb must be nonnegative, got {hb}")
    if not (6.5 <= ph <= 8.0):
        raise OutOfPhysiologicRange(f"ph must lie in [6.5, 8.0], got {ph}")
    return hco3 - 24.4 + (2.3 * hb + 7.7) * (ph - 7.4)
