"""Cohort ingest, inclusion filtering, outcome derivation, synthetic cohorts.

The ingest CSV is assumed pre-filtered by diagnosis; this module applies
the demographic/stay criteria, derives time-to-event outcomes, and can
generate synthetic cohorts with a planted logistic ground truth for
validation at desk scale.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .errors import (
    EmptyFile,
    InvalidTimestamp,
    MissingColumn,
    ParseError,
    UnknownColumn,
)

MANDATORY_COLUMNS = (
    "subject_id",
    "admission_time",
    "discharge_time",
    "icu_los_days",
    "age_years",
    "death_time",
)
OPTIONAL_COLUMNS = ("stay_id",)

EXCLUSION_REASONS = (
    "icu_stay_too_short",
    "died_within_24h",
    "age_out_of_range",
    "repeat_admission",
)


@dataclass
class DictionaryEntry:
    name: str
    unit: str = ""
    lo: float = -math.inf
    hi: float = math.inf


@dataclass
class DataDictionary:
    """Feature name -> unit and plausible range, for ingest validation."""

    entries: list[DictionaryEntry]

    @property
    def names(self):
        return [e.name for e in self.entries]

    def __contains__(self, name):
        return any(e.name == name for e in self.entries)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        entries = [
            DictionaryEntry(
                name=item["name"],
                unit=item.get("unit", ""),
                lo=item.get("lo", -math.inf),
                hi=item.get("hi", math.inf),
            )
            for item in raw["features"]
        ]
        return cls(entries)

    def to_json(self, path):
        payload = {
            "features": [
                {
                    "name": e.name,
                    "unit": e.unit,
                    "lo": None if e.lo == -math.inf else e.lo,
                    "hi": None if e.hi == math.inf else e.hi,
                }
                for e in self.entries
            ]
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class PatientRecord:
    subject_id: str
    admission_time: datetime
    discharge_time: datetime
    icu_los_days: float
    age_years: float
    death_time: datetime | None
    clinical_values: dict[str, float | None]
    stay_id: str = ""

    def validate(self, row=None):
        if self.discharge_time < self.admission_time:
            raise ParseError(
                f"discharge before admission for subject {self.subject_id}", row=row
            )
        if self.icu_los_days < 0:
            raise ParseError(
                f"negative ICU length of stay for subject {self.subject_id}", row=row
            )
        if self.age_years < 0:
            raise ParseError(f"negative age for subject {self.subject_id}", row=row)
        if self.death_time is not None and self.death_time < self.admission_time:
            raise InvalidTimestamp(
                f"death precedes admission for subject {self.subject_id}"
            )


@dataclass
class CohortTable:
    records: list[PatientRecord]
    dictionary: DataDictionary

    def __len__(self):
        return len(self.records)


@dataclass
class SurvivalOutcome:
    """Time to event in days, with the event flag (False = censored)."""

    time_days: float
    event: bool

    def __post_init__(self):
        if not self.time_days > 0:
            raise InvalidTimestamp(f"non-positive event time {self.time_days}")


@dataclass
class ExclusionReport:
    input_count: int = 0
    retained: int = 0
    counts: dict[str, int] = field(
        default_factory=lambda: {reason: 0 for reason in EXCLUSION_REASONS}
    )

    def to_json(self, path):
        payload = {"input": self.input_count, "retained": self.retained, **self.counts}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_cohort(path, dictionary: DataDictionary) -> CohortTable:
    """Read a cohort CSV (UTF-8, ISO-8601 timestamps, empty cell = missing).

    The header must contain the mandatory identifier/timestamp columns and
    every dictionary feature; extra feature columns are rejected.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} has no header row") from None
        known = set(MANDATORY_COLUMNS) | set(OPTIONAL_COLUMNS) | set(dictionary.names)
        for col in MANDATORY_COLUMNS:
            if col not in header:
                raise MissingColumn(f"mandatory column '{col}' absent")
        for name in dictionary.names:
            if name not in header:
                raise MissingColumn(f"dictionary feature '{name}' absent")
        for col in header:
            if col not in known:
                raise UnknownColumn(f"column '{col}' not in the data dictionary")
        pos = {name: header.index(name) for name in header}

        records = []
        for row_i, cells in enumerate(reader, start=1):
            if len(cells) != len(header):
                raise ParseError(
                    f"row {row_i} has {len(cells)} cells, expected {len(header)}",
                    row=row_i,
                )
            record = PatientRecord(
                subject_id=cells[pos["subject_id"]],
                admission_time=_parse_ts(cells[pos["admission_time"]], "admission_time", row_i, required=True),
                discharge_time=_parse_ts(cells[pos["discharge_time"]], "discharge_time", row_i, required=True),
                icu_los_days=_parse_num(cells[pos["icu_los_days"]], "icu_los_days", row_i, required=True),
                age_years=_parse_num(cells[pos["age_years"]], "age_years", row_i, required=True),
                death_time=_parse_ts(cells[pos["death_time"]], "death_time", row_i),
                clinical_values={
                    name: _parse_num(cells[pos[name]], name, row_i)
                    for name in dictionary.names
                },
                stay_id=cells[pos["stay_id"]] if "stay_id" in pos else "",
            )
            record.validate(row=row_i)
            records.append(record)
    if not records:
        raise EmptyFile(f"{path} contains a header but no data rows")
    return CohortTable(records=records, dictionary=dictionary)


def _parse_num(cell, column, row, required=False):
    cell = cell.strip()
    if cell == "":
        if required:
            raise ParseError(f"missing value in '{column}' at row {row}", row=row)
        return None
    try:
        return float(cell)
    except ValueError:
        raise ParseError(
            f"non-numeric value '{cell}' in column '{column}' at row {row}", row=row
        ) from None


def _parse_ts(cell, column, row, required=False):
    cell = cell.strip()
    if cell == "":
        if required:
            raise ParseError(f"missing timestamp in '{column}' at row {row}", row=row)
        return None
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        raise ParseError(
            f"invalid ISO-8601 timestamp '{cell}' in column '{column}' at row {row}",
            row=row,
        ) from None


def apply_inclusion(
    table: CohortTable,
    min_age: float = 18.0,
    max_age: float = 90.0,
    min_icu_days: float = 1.0,
) -> tuple[CohortTable, ExclusionReport]:
    """Apply the stay/age/first-admission criteria.

    Reasons are checked in a fixed order (LOS, 24 h survival, age, repeat
    admission) and each excluded record is counted once, under the first
    matching reason. "First admission" keeps the earliest admission among
    records that survived the other checks, ties broken by stay_id.
    """
    report = ExclusionReport(input_count=len(table.records))
    eligible = []
    for rec in table.records:
        if rec.icu_los_days < min_icu_days:
            report.counts["icu_stay_too_short"] += 1
        elif rec.death_time is not None and (
            rec.death_time - rec.admission_time
        ) < timedelta(hours=24):
            report.counts["died_within_24h"] += 1
        elif not (min_age <= rec.age_years <= max_age):
            report.counts["age_out_of_range"] += 1
        else:
            eligible.append(rec)

    first_by_subject = {}
    for rec in eligible:
        key = (rec.admission_time, rec.stay_id)
        cur = first_by_subject.get(rec.subject_id)
        if cur is None or key < (cur.admission_time, cur.stay_id):
            first_by_subject[rec.subject_id] = rec
    retained = []
    for rec in eligible:
        if first_by_subject[rec.subject_id] is rec:
            retained.append(rec)
        else:
            report.counts["repeat_admission"] += 1

    report.retained = len(retained)
    return CohortTable(records=retained, dictionary=table.dictionary), report


def derive_outcome(record: PatientRecord, window_days: float = 28.0) -> SurvivalOutcome:
    """Time-to-event within the observation window.

    Death inside the window yields an event at the elapsed time; anything
    else is censored at the window end.
    """
    if record.death_time is not None:
        if record.death_time < record.admission_time:
            raise InvalidTimestamp(
                f"death precedes admission for subject {record.subject_id}"
            )
        elapsed = (record.death_time - record.admission_time) / timedelta(days=1)
        if elapsed <= window_days:
            return SurvivalOutcome(time_days=elapsed, event=True)
    return SurvivalOutcome(time_days=window_days, event=False)


# --- synthetic cohorts ------------------------------------------------------

HORIZONS = (7, 14, 28)


@dataclass
class SyntheticCohortSpec:
    """Generator parameters for a cohort with planted logistic ground truth."""

    n_patients: int
    n_features: int
    planted_coefficients: np.ndarray
    planted_intercepts: tuple[float, float, float]
    missingness_rate: float = 0.0
    censoring_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.planted_coefficients = np.asarray(
            self.planted_coefficients, dtype=np.float64
        )
        if self.n_patients < 0 or self.n_features <= 0:
            raise ValueError("n_patients must be >= 0 and n_features positive")
        if self.planted_coefficients.shape != (self.n_features,):
            raise ValueError("coefficient vector length must equal n_features")
        if not (0.0 <= self.missingness_rate < 1.0):
            raise ValueError("missingness_rate must lie in [0, 1)")
        if not (0.0 <= self.censoring_rate < 1.0):
            raise ValueError("censoring_rate must lie in [0, 1)")
        b7, b14, b28 = self.planted_intercepts
        if not (b7 <= b14 <= b28):
            raise ValueError("planted intercepts must be nondecreasing with horizon")


@dataclass
class OracleModel:
    """The planted generative model, kept for verification."""

    feature_names: list[str]
    coefficients: np.ndarray
    intercepts: dict[int, float]

    def horizon_probability(self, x, horizon):
        logit = self.intercepts[horizon] + np.asarray(x) @ self.coefficients
        return 1.0 / (1.0 + np.exp(-logit))

    def bayes_auroc(self, horizon, n_mc=200_000, seed=0):
        """Monte-Carlo AUROC of the true scores against their own labels."""
        from ._kernels import auroc

        rng = np.random.default_rng(np.random.SeedSequence(seed))
        x = rng.standard_normal((n_mc, self.coefficients.shape[0]))
        p = self.horizon_probability(x, horizon)
        labels = rng.random(n_mc) < p
        return auroc(p, labels.astype(np.float64))

    def to_json(self, path):
        payload = {
            "feature_names": self.feature_names,
            "coefficients": self.coefficients.tolist(),
            "intercepts": {str(h): v for h, v in self.intercepts.items()},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            feature_names=raw["feature_names"],
            coefficients=np.asarray(raw["coefficients"], dtype=np.float64),
            intercepts={int(h): v for h, v in raw["intercepts"].items()},
        )


_BASE_ADMISSION = datetime(2024, 1, 1, 8, 0, 0)


def generate_synthetic_cohort(
    spec: SyntheticCohortSpec,
) -> tuple[CohortTable, OracleModel]:
    """Draw a cohort whose outcomes follow a planted logistic model.

    Features are iid standard normal, so the planted logit coefficients
    are directly interpretable and the Bayes AUROC is computable by Monte
    Carlo. Horizon death probabilities follow the logistic link at the
    planted intercepts; death times fall uniformly inside (1, 7],
    (7, 14], (14, 28]. Censoring erases a death record completely at
    random; missingness blanks clinical values completely at random.
    All draws happen in a fixed order, so equal seeds give byte-identical
    cohorts.
    """
    n, d = spec.n_patients, spec.n_features
    names = [f"feature_{i:02d}" for i in range(d)]
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))

    x = rng.standard_normal((n, d))
    u = rng.random(n)
    t_frac = rng.random(n)
    censor_draw = rng.random(n)
    missing = rng.random((n, d)) < spec.missingness_rate
    los = 1.0 + rng.exponential(scale=3.0, size=n)

    logit = x @ spec.planted_coefficients
    b7, b14, b28 = spec.planted_intercepts
    p7 = _sigmoid(b7 + logit)
    p14 = _sigmoid(b14 + logit)
    p28 = _sigmoid(b28 + logit)

    records = []
    for i in range(n):
        admission = _BASE_ADMISSION + timedelta(hours=float(i))
        if u[i] < p7[i]:
            death_days = 1.0 + t_frac[i] * 6.0
        elif u[i] < p14[i]:
            death_days = 7.0 + t_frac[i] * 7.0
        elif u[i] < p28[i]:
            death_days = 14.0 + t_frac[i] * 14.0
        else:
            death_days = None
        if death_days is not None and censor_draw[i] < spec.censoring_rate:
            death_days = None
        values = {
            names[j]: (None if missing[i, j] else float(x[i, j])) for j in range(d)
        }
        records.append(
            PatientRecord(
                subject_id=f"synth-{i:06d}",
                admission_time=admission,
                discharge_time=admission + timedelta(days=float(los[i])),
                icu_los_days=float(los[i]),
                age_years=float(25.0 + 60.0 * (i / max(n - 1, 1))),
                death_time=(
                    None
                    if death_days is None
                    else admission + timedelta(days=death_days)
                ),
                clinical_values=values,
                stay_id=f"stay-{i:06d}",
            )
        )

    dictionary = DataDictionary(
        entries=[DictionaryEntry(name=name, unit="z", lo=-8.0, hi=8.0) for name in names]
    )
    oracle = OracleModel(
        feature_names=names,
        coefficients=spec.planted_coefficients.copy(),
        intercepts={7: b7, 14: b14, 28: b28},
    )
    return CohortTable(records=records, dictionary=dictionary), oracle


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


def write_cohort_csv(table: CohortTable, path):
    """Serialize a cohort back to the ingest CSV format."""
    names = table.dictionary.names
    header = list(MANDATORY_COLUMNS) + ["stay_id"] + names
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in table.records:
            row = [
                rec.subject_id,
                rec.admission_time.isoformat(),
                rec.discharge_time.isoformat(),
                repr(rec.icu_los_days),
                repr(rec.age_years),
                "" if rec.death_time is None else rec.death_time.isoformat(),
                rec.stay_id,
            ]
            for name in names:
                v = rec.clinical_values.get(name)
                row.append("" if v is None else repr(v))
            writer.writerow(row)
