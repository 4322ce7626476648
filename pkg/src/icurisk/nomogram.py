"""Point-scale nomogram construction, SVG rendering, and bundle export.

A fitted logistic model maps exactly onto a point scale: each feature's
span is proportional to |coefficient| times its z-scored range, the
largest span is normalized to 100 points, and the total-points axis maps
back to probability through an affine logit (logit = l0 + alpha * total).
The probability lookup table is sized so linear interpolation stays
within 1e-6 of the exact sigmoid.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRange, IncompleteBundle, MissingFeature
from .model import HORIZONS, LogisticModel, _sigmoid

# Max |second derivative| of the sigmoid is 1/(6*sqrt(3)); a grid step h
# on the logit axis then carries interpolation error h^2/(8*6*sqrt(3)),
# so h <= 9.119e-3 keeps the table within 1e-6 of the exact curve.
_MAX_LOGIT_STEP = 9.119e-3
_MIN_TABLE = 1001


@dataclass
class Axis:
    name: str
    unit: str
    lo: float
    hi: float
    span: float  # points across the axis
    direction: int  # +1: higher value earns points; -1: reversed

    @property
    def flat(self):
        return bool(self.span == 0.0)

    def points(self, value):
        frac = (value - self.lo) / (self.hi - self.lo)
        if self.direction < 0:
            frac = 1.0 - frac
        return self.span * frac

    def to_dict(self):
        return {
            "name": self.name,
            "unit": self.unit,
            "lo": self.lo,
            "hi": self.hi,
            "span": self.span,
            "direction": self.direction,
            "flat": self.flat,
        }


@dataclass
class NomogramSpec:
    horizon_days: int
    axes: list[Axis]
    alpha: float  # logit per point
    l0: float  # logit at zero total points
    total_points_max: float
    prob_points: np.ndarray
    prob_values: np.ndarray
    model_ref: str

    def to_dict(self):
        return {
            "horizon_days": self.horizon_days,
            "axes": [a.to_dict() for a in self.axes],
            "alpha": self.alpha,
            "l0": self.l0,
            "total_points_max": self.total_points_max,
            "prob_map": {
                "points": [float(p) for p in self.prob_points],
                "prob": [float(p) for p in self.prob_values],
            },
            "model_ref": self.model_ref,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            horizon_days=raw["horizon_days"],
            axes=[
                Axis(
                    name=a["name"],
                    unit=a["unit"],
                    lo=a["lo"],
                    hi=a["hi"],
                    span=a["span"],
                    direction=a["direction"],
                )
                for a in raw["axes"]
            ],
            alpha=raw["alpha"],
            l0=raw["l0"],
            total_points_max=raw["total_points_max"],
            prob_points=np.asarray(raw["prob_map"]["points"], dtype=np.float64),
            prob_values=np.asarray(raw["prob_map"]["prob"], dtype=np.float64),
            model_ref=raw["model_ref"],
        )


@dataclass
class PatientScore:
    points: dict[str, float]
    total: float
    clamped: list[str] = field(default_factory=list)


def model_digest(model: LogisticModel) -> str:
    blob = json.dumps(model.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def build_nomogram(
    model: LogisticModel, ranges: dict, units: dict | None = None
) -> NomogramSpec:
    """Derive the point algebra from a fitted model and per-feature ranges.

    ranges maps feature name -> (lo, hi) in raw clinical units (default
    upstream: 1st-99th training percentiles). Negative-coefficient axes
    are reversed so points stay nonnegative; with anchor_i = the
    zero-point end of axis i, logit(x) = l0 + alpha * total_points(x)
    holds exactly.
    """
    units = units or {}
    spans_raw = []
    for i, name in enumerate(model.feature_names):
        if name not in ranges:
            raise DegenerateRange(f"no range supplied for '{name}'")
        lo, hi = ranges[name][0], ranges[name][1]
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise DegenerateRange(f"range for '{name}' must be finite with lo < hi")
        spans_raw.append(
            abs(model.coefficients[i]) * (hi - lo) / model.norm_stats.sd[i]
        )

    m = max(spans_raw)
    alpha = m / 100.0
    axes = []
    l0 = float(model.intercept)
    for i, name in enumerate(model.feature_names):
        lo, hi = ranges[name][0], ranges[name][1]
        beta = float(model.coefficients[i])
        span = float(100.0 * spans_raw[i] / m) if m > 0.0 else 0.0
        direction = 1 if beta >= 0.0 else -1
        anchor = lo if direction > 0 else hi
        l0 += beta * (anchor - model.norm_stats.mean[i]) / model.norm_stats.sd[i]
        axes.append(
            Axis(
                name=name,
                unit=units.get(name, ""),
                lo=lo,
                hi=hi,
                span=span,
                direction=direction,
            )
        )

    total_max = float(sum(a.span for a in axes))
    if alpha > 0.0 and total_max > 0.0:
        table_n = max(_MIN_TABLE, int(math.ceil(alpha * total_max / _MAX_LOGIT_STEP)) + 1)
    else:
        table_n = 2
    pts = np.linspace(0.0, max(total_max, 1.0), table_n)
    probs = _sigmoid(l0 + alpha * pts)
    return NomogramSpec(
        horizon_days=model.horizon_days,
        axes=axes,
        alpha=float(alpha),
        l0=float(l0),
        total_points_max=total_max,
        prob_points=pts,
        prob_values=probs,
        model_ref=model_digest(model),
    )


def score_patient(spec: NomogramSpec, x) -> PatientScore:
    """Per-axis and total points; out-of-range values clamp with a flag."""
    if isinstance(x, dict):
        absent = [a.name for a in spec.axes if a.name not in x or x[a.name] is None]
        if absent:
            raise MissingFeature(f"missing values for {absent}")
        raw = [float(x[a.name]) for a in spec.axes]
    else:
        raw = [float(v) for v in x]
        if len(raw) != len(spec.axes):
            raise MissingFeature(
                f"expected {len(spec.axes)} values, got {len(raw)}"
            )
    points = {}
    clamped = []
    for axis, value in zip(spec.axes, raw):
        if not math.isfinite(value):
            raise MissingFeature(f"non-finite value for '{axis.name}'")
        v = value
        if v < axis.lo or v > axis.hi:
            v = min(max(v, axis.lo), axis.hi)
            clamped.append(axis.name)
        points[axis.name] = float(axis.points(v))
    return PatientScore(
        points=points, total=float(sum(points.values())), clamped=clamped
    )


def probability_at(spec: NomogramSpec, total_points: float) -> float:
    """Probability for a point total, by table interpolation."""
    return float(np.interp(total_points, spec.prob_points, spec.prob_values))


# --- SVG rendering ------------------------------------------------------------

_MARGIN_LEFT = 160.0
_MARGIN_TOP = 40.0
_PLOT_WIDTH = 600.0
_ROW_STEP = 50.0
_TICKS_PER_AXIS = 5


def render_svg(spec: NomogramSpec) -> str:
    """Deterministic SVG: a points ruler, one axis per feature, then
    total-points and probability scales. Tick x-positions follow each
    axis's affine point function on a shared 100-point pixel scale."""
    px_per_point = _PLOT_WIDTH / 100.0
    rows = len(spec.axes) + 3
    height = _MARGIN_TOP + rows * _ROW_STEP + 30.0
    width = _MARGIN_LEFT + _PLOT_WIDTH * max(1.0, spec.total_points_max / 100.0) + 40.0

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}" '
        f'font-family="Helvetica, Arial, sans-serif" font-size="11">'
    )
    out.append(
        "<style>line{stroke:#222;stroke-width:1}text{fill:#222}"
        ".axis-name{font-weight:bold}</style>"
    )
    title = f"{spec.horizon_days}-day mortality risk"
    out.append(f'<text x="{_fmt(_MARGIN_LEFT)}" y="20" class="axis-name">{title}</text>')

    y = _MARGIN_TOP
    out.append(_scale_axis("points", 0.0, 100.0, y, px_per_point, None))
    for axis in spec.axes:
        y += _ROW_STEP
        out.append(_feature_axis(axis, y, px_per_point))
    y += _ROW_STEP
    out.append(
        _scale_axis(
            "total-points", 0.0, max(spec.total_points_max, 1.0), y, px_per_point, None
        )
    )
    y += _ROW_STEP
    out.append(_scale_axis("probability", 0.0, 1.0, y, px_per_point, spec))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _fmt(v):
    return f"{v:.2f}"


def _feature_axis(axis: Axis, y, px_per_point) -> str:
    x0 = _MARGIN_LEFT
    x1 = _MARGIN_LEFT + axis.span * px_per_point
    parts = [f'<g class="feature-axis" data-name="{axis.name}">']
    label = axis.name if not axis.unit else f"{axis.name} ({axis.unit})"
    parts.append(
        f'<text x="{_fmt(x0 - 10.0)}" y="{_fmt(y + 4.0)}" text-anchor="end" '
        f'class="axis-name">{label}</text>'
    )
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(max(x1, x0))}" y2="{_fmt(y)}"/>'
    )
    for value in np.linspace(axis.lo, axis.hi, _TICKS_PER_AXIS):
        tx = x0 + axis.points(float(value)) * px_per_point
        parts.append(
            f'<line x1="{_fmt(tx)}" y1="{_fmt(y - 4.0)}" x2="{_fmt(tx)}" y2="{_fmt(y + 4.0)}"/>'
        )
        parts.append(
            f'<text x="{_fmt(tx)}" y="{_fmt(y + 16.0)}" text-anchor="middle" '
            f'data-value="{value:.6g}">{value:.6g}</text>'
        )
    parts.append("</g>")
    return "\n".join(parts)


def _scale_axis(name, lo, hi, y, px_per_point, spec) -> str:
    x0 = _MARGIN_LEFT
    parts = [f'<g class="scale-axis" data-name="{name}">']
    parts.append(
        f'<text x="{_fmt(x0 - 10.0)}" y="{_fmt(y + 4.0)}" text-anchor="end" '
        f'class="axis-name">{name}</text>'
    )
    if name == "probability":
        # ticks at fixed probabilities, placed via the inverse point map
        x1 = x0 + (spec.total_points_max if spec.total_points_max > 0 else 1.0) * px_per_point
        parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(x1)}" y2="{_fmt(y)}"/>')
        if spec.alpha > 0.0:
            for p in (0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99):
                total = (math.log(p / (1.0 - p)) - spec.l0) / spec.alpha
                if 0.0 <= total <= spec.total_points_max:
                    tx = x0 + total * px_per_point
                    parts.append(
                        f'<line x1="{_fmt(tx)}" y1="{_fmt(y - 4.0)}" x2="{_fmt(tx)}" y2="{_fmt(y + 4.0)}"/>'
                    )
                    parts.append(
                        f'<text x="{_fmt(tx)}" y="{_fmt(y + 16.0)}" text-anchor="middle">{p:g}</text>'
                    )
    else:
        x1 = x0 + hi * px_per_point
        parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(x1)}" y2="{_fmt(y)}"/>')
        for value in np.linspace(lo, hi, 11):
            tx = x0 + float(value) * px_per_point
            parts.append(
                f'<line x1="{_fmt(tx)}" y1="{_fmt(y - 4.0)}" x2="{_fmt(tx)}" y2="{_fmt(y + 4.0)}"/>'
            )
            parts.append(
                f'<text x="{_fmt(tx)}" y="{_fmt(y + 16.0)}" text-anchor="middle">{value:.6g}</text>'
            )
    parts.append("</g>")
    return "\n".join(parts)


# --- bundle export -------------------------------------------------------------

SCHEMA_VERSION = 1


def export_bundle(
    models: dict,
    specs: dict,
    path,
    background_mean: dict,
    units: dict | None = None,
    svgs: dict | None = None,
    provenance: dict | None = None,
) -> dict:
    """Write the single JSON artifact the UI consumes.

    models/specs map horizon (7, 14, 28) to LogisticModel/NomogramSpec;
    background_mean maps feature name to the raw training mean used for
    attributions. Returns the bundle dict that was written.
    """
    missing = [h for h in HORIZONS if h not in models or h not in specs]
    if missing:
        raise IncompleteBundle(f"missing horizons: {missing}")
    names = list(models[HORIZONS[0]].feature_names)
    for h in HORIZONS:
        if list(models[h].feature_names) != names:
            raise IncompleteBundle("horizon models disagree on feature names")
        if [a.name for a in specs[h].axes] != names:
            raise IncompleteBundle(f"nomogram axes for horizon {h} mismatch features")
    absent = [nm for nm in names if nm not in background_mean]
    if absent:
        raise IncompleteBundle(f"background mean missing features: {absent}")

    bundle = {
        "schema_version": SCHEMA_VERSION,
        "feature_names": names,
        "units": {nm: (units or {}).get(nm, "") for nm in names},
        "background_mean": {nm: float(background_mean[nm]) for nm in names},
        "horizons": {},
        "provenance": provenance or {},
    }
    for h in HORIZONS:
        model = models[h]
        entry = {
            "intercept": float(model.intercept),
            "coefficients": [float(c) for c in model.coefficients],
            "norm_mean": [float(v) for v in model.norm_stats.mean],
            "norm_sd": [float(v) for v in model.norm_stats.sd],
            "nomogram": specs[h].to_dict(),
        }
        if svgs and h in svgs:
            entry["svg"] = svgs[h]
        bundle["horizons"][str(h)] = entry

    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(bundle, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return bundle


def load_bundle(path) -> dict:
    """Read a bundle and check the pieces prediction needs are present."""
    with open(path, encoding="utf-8") as fh:
        bundle = json.load(fh)
    if bundle.get("schema_version") != SCHEMA_VERSION:
        raise IncompleteBundle(
            f"unsupported schema_version {bundle.get('schema_version')!r}"
        )
    for h in HORIZONS:
        if str(h) not in bundle.get("horizons", {}):
            raise IncompleteBundle(f"bundle lacks horizon {h}")
    return bundle
