"""Discrimination, calibration, and cohort-comparison statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from ._kernels import auroc as _auroc_kernel
from ._kernels import cindex_counts
from .errors import DegenerateSample, NoComparablePairs, NoPositives, SingleClass
from .resample import substream

log = logging.getLogger(__name__)


@dataclass
class MetricReport:
    horizon_days: int
    auroc: float
    auroc_ci: tuple[float, float, float]  # lower, upper, level
    pr_auc: float
    sensitivity: float
    specificity: float
    threshold: float
    n_test: int
    n_events: int
    ci_method: str = "percentile_bootstrap"
    ci_replicates: int = 2000

    def to_dict(self):
        return {
            "horizon_days": self.horizon_days,
            "auroc": self.auroc,
            "auroc_ci": {
                "lower": self.auroc_ci[0],
                "upper": self.auroc_ci[1],
                "level": self.auroc_ci[2],
            },
            "pr_auc": self.pr_auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "threshold": self.threshold,
            "n_test": self.n_test,
            "n_events": self.n_events,
            "ci_method": self.ci_method,
            "ci_replicates": self.ci_replicates,
        }


def _as_binary(labels):
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValueError("labels must be 0/1")
    return labels


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative; ties 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    if not (np.any(labels == 1.0) and np.any(labels == 0.0)):
        raise SingleClass("AUROC needs both classes")
    return float(_auroc_kernel(scores, labels))


def pr_auc(scores, labels) -> float:
    """Area under the precision-recall curve, average-precision convention.

    AP = sum over distinct descending thresholds of
    (recall step) x (precision after the step); tied scores enter together.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    n_pos = int((labels == 1.0).sum())
    if n_pos == 0:
        raise NoPositives("PR-AUC needs at least one positive")

    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    y_sorted = labels[order]
    ap = 0.0
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        tp_new = tp + int(y_sorted[i : j + 1].sum())
        fp_new = fp + (j - i + 1) - (tp_new - tp)
        if tp_new > tp:
            precision = tp_new / (tp_new + fp_new)
            ap += (tp_new - tp) / n_pos * precision
        tp, fp = tp_new, fp_new
        i = j + 1
    return float(ap)


def bootstrap_ci(
    scores, labels, metric=auroc, B: int = 2000, level: float = 0.95, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap CI with per-class (stratified) resampling.

    Each replicate resamples positives and negatives separately with
    replacement so class counts are preserved; a replicate that still
    lacks a class (possible only for non-binary metrics) is redrawn and
    the redraw count logged.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    pos = np.flatnonzero(labels == 1.0)
    neg = np.flatnonzero(labels == 0.0)
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("bootstrap CI needs both classes")

    stats = np.empty(B)
    redraws = 0
    for b in range(B):
        rng = np.random.default_rng(substream(seed, b))
        for _ in range(100):
            idx = np.concatenate(
                [
                    pos[rng.integers(0, pos.size, pos.size)],
                    neg[rng.integers(0, neg.size, neg.size)],
                ]
            )
            resampled = labels[idx]
            if np.any(resampled == 1.0) and np.any(resampled == 0.0):
                break
            redraws += 1
        stats[b] = metric(scores[idx], resampled)
    if redraws:
        log.info("bootstrap_ci redrew %d degenerate resamples", redraws)

    alpha = 1.0 - level
    lower = float(np.quantile(stats, alpha / 2.0))
    upper = float(np.quantile(stats, 1.0 - alpha / 2.0))
    return lower, upper


def confusion_at(scores, labels, threshold: float = 0.5):
    """(sensitivity, specificity, ppv, npv) classifying score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    pred = scores >= threshold
    tp = int(np.sum(pred & (labels == 1.0)))
    fp = int(np.sum(pred & (labels == 0.0)))
    fn = int(np.sum(~pred & (labels == 1.0)))
    tn = int(np.sum(~pred & (labels == 0.0)))
    sens = tp / (tp + fn) if tp + fn else float("nan")
    spec = tn / (tn + fp) if tn + fp else float("nan")
    ppv = tp / (tp + fp) if tp + fp else float("nan")
    npv = tn / (tn + fn) if tn + fn else float("nan")
    return sens, spec, ppv, npv


def c_index(risk, outcomes) -> float:
    """Harrell's concordance over admissible pairs; risk ties count 0.5.

    A pair is admissible when the earlier subject had an event strictly
    before the other subject's time; equal-time and censored-censored
    pairs carry no ordering information.
    """
    risk = np.asarray(risk, dtype=np.float64)
    time = np.array([o.time_days for o in outcomes], dtype=np.float64)
    event = np.array([o.event for o in outcomes], dtype=np.float64)
    num, den = cindex_counts(risk, time, event)
    if den == 0:
        raise NoComparablePairs("no admissible pairs under the censoring pattern")
    return float(num / den)


def welch_t_test(a, b) -> tuple[float, float, float]:
    """Welch's unequal-variance t statistic, Satterthwaite df, two-sided p."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateSample("each sample needs at least 2 observations")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        raise DegenerateSample("both samples have zero variance")
    t = float((a.mean() - b.mean()) / np.sqrt(se2))
    df = float(se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)))
    p = float(2.0 * stdtr(df, -abs(t)))
    return t, df, p


def calibration_curve(scores, labels, bins: int = 10):
    """Equal-frequency bins of (mean prediction, observed rate, count).

    Bin edges are score quantiles; duplicate edges merge, so a constant
    score yields a single bin and bins > n degrades to singleton bins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    if bins < 1:
        raise ValueError("bins must be positive")
    edges = np.quantile(scores, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    idx = np.searchsorted(edges, scores, side="left")
    out = []
    for b in range(bins):
        inbin = idx == b
        n = int(inbin.sum())
        if n == 0:
            continue
        out.append((float(scores[inbin].mean()), float(labels[inbin].mean()), n))
    out.sort(key=lambda row: row[0])
    return out


def roc_points(scores, labels):
    """(fpr, tpr, threshold) rows over descending unique thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    n_pos = (labels == 1.0).sum()
    n_neg = (labels == 0.0).sum()
    order = np.argsort(-scores, kind="mergesort")
    pts = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i, n = 0, len(scores)
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        grp = labels[order[i : j + 1]]
        tp += int((grp == 1.0).sum())
        fp += int((grp == 0.0).sum())
        pts.append((fp / n_neg, tp / n_pos, float(scores[order[i]])))
        i = j + 1
    return pts


def pr_points(scores, labels):
    """(recall, precision, threshold) rows over descending unique thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_binary(labels)
    n_pos = (labels == 1.0).sum()
    order = np.argsort(-scores, kind="mergesort")
    pts = []
    tp = fp = 0
    i, n = 0, len(scores)
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        grp = labels[order[i : j + 1]]
        tp += int((grp == 1.0).sum())
        fp += int((grp == 0.0).sum())
        pts.append((tp / n_pos, tp / (tp + fp), float(scores[order[i]])))
        i = j + 1
    return pts
