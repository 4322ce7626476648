"""Two-stage feature selection: F-test filter, recursive elimination, VIF screen."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import KExceedsDimensions, ConstantColumn, SingleClass, SingularDesign
from .preprocess import FeatureMatrix


@dataclass
class FeatureRanking:
    names: list[str]
    scores: list[float]
    method: str
    eliminated_order: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.names) != len(self.scores):
            raise ValueError("names and scores lengths differ")

    def to_dict(self):
        return {
            "method": self.method,
            "names": list(self.names),
            "scores": [float(s) for s in self.scores],
            "eliminated_order": list(self.eliminated_order),
        }


def _check_labels(labels):
    labels = np.asarray(labels, dtype=np.float64)
    if not (np.any(labels == 1.0) and np.any(labels == 0.0)):
        raise SingleClass("labels contain a single class")
    return labels


def f_score(feature, labels) -> float:
    """One-way ANOVA F statistic for a two-group split.

    Zero between-class variance gives 0; zero within-class variance with
    separated means gives +inf (sentinel for perfect separation, not an
    error).
    """
    feature = np.asarray(feature, dtype=np.float64)
    labels = _check_labels(labels)
    if feature.shape[0] < 4:
        raise ValueError("F statistic needs at least 4 observations")
    g0 = feature[labels == 0.0]
    g1 = feature[labels == 1.0]
    grand = feature.mean()
    ss_between = g0.size * (g0.mean() - grand) ** 2 + g1.size * (g1.mean() - grand) ** 2
    ss_within = ((g0 - g0.mean()) ** 2).sum() + ((g1 - g1.mean()) ** 2).sum()
    if ss_between == 0.0:
        return 0.0
    if ss_within == 0.0:
        return math.inf
    # two groups: 1 between df, n-2 within df
    return float((ss_between / 1.0) / (ss_within / (feature.shape[0] - 2)))


def select_k_best(m: FeatureMatrix, labels, k: int = 50) -> FeatureRanking:
    """Top-k features by F statistic, descending; ties keep original column order."""
    labels = _check_labels(labels)
    d = len(m.names)
    if k > d:
        raise KExceedsDimensions(f"k={k} exceeds {d} available features")
    if k < 1:
        raise ValueError("k must be positive")
    scores = [f_score(m.values[:, j], labels) for j in range(d)]
    order = sorted(range(d), key=lambda j: (-scores[j], j))[:k]
    return FeatureRanking(
        names=[m.names[j] for j in order],
        scores=[scores[j] for j in order],
        method="f_test",
    )


def rfe(
    m: FeatureMatrix,
    labels,
    n_target: int = 7,
    l2: float = 1e-6,
    protected: tuple[str, ...] = (),
) -> FeatureRanking:
    """Recursive feature elimination wrapping the package's logistic fitter.

    Each round fits on the surviving z-scored columns and removes the one
    with the smallest |coefficient| (ties: lowest column index). Features
    in `protected` are never eliminated. Scores in the result are the
    |coefficients| of the final fit; eliminated_order lists drops
    first-to-last.
    """
    from .model import fit_logistic
    from .preprocess import zscore_fit_transform

    labels = _check_labels(labels)
    d = len(m.names)
    if n_target > d:
        raise KExceedsDimensions(f"n_target={n_target} exceeds {d} features")
    if n_target < 1:
        raise ValueError("n_target must be positive")
    if len(protected) > n_target:
        raise ValueError("more protected features than the target count")

    surviving = list(range(d))
    eliminated = []
    while len(surviving) > n_target:
        sub = FeatureMatrix(
            values=m.values[:, surviving],
            missing_mask=np.zeros((m.values.shape[0], len(surviving)), dtype=bool),
            names=[m.names[j] for j in surviving],
            units=[m.units[j] for j in surviving],
        )
        fit = fit_logistic(zscore_fit_transform(sub), labels, l2=l2)
        importance = np.abs(fit.coefficients)
        candidates = [
            pos
            for pos in range(len(surviving))
            if m.names[surviving[pos]] not in protected
        ]
        if not candidates:
            break
        worst = min(candidates, key=lambda pos: (importance[pos], pos))
        eliminated.append(m.names[surviving[worst]])
        del surviving[worst]

    sub = FeatureMatrix(
        values=m.values[:, surviving],
        missing_mask=np.zeros((m.values.shape[0], len(surviving)), dtype=bool),
        names=[m.names[j] for j in surviving],
        units=[m.units[j] for j in surviving],
    )
    fit = fit_logistic(zscore_fit_transform(sub), labels, l2=l2)
    return FeatureRanking(
        names=[m.names[j] for j in surviving],
        scores=[float(abs(c)) for c in fit.coefficients],
        method="rfe",
        eliminated_order=eliminated,
    )


def vif(m: FeatureMatrix) -> FeatureRanking:
    """Variance inflation factors, 1/(1-R²) of each column on the rest.

    Result is sorted descending by VIF; exactly collinear columns raise
    SingularDesign naming the most correlated pair.
    """
    x = np.asarray(m.values, dtype=np.float64)
    n, d = x.shape
    if d < 2:
        raise ValueError("VIF needs at least two columns")
    if n <= d:
        raise ValueError("VIF needs more rows than columns")
    sd = x.std(axis=0, ddof=1)
    flat = np.flatnonzero(sd == 0.0)
    if flat.size:
        raise ConstantColumn(
            f"columns {[m.names[j] for j in flat]} are constant; VIF undefined"
        )

    vifs = []
    for j in range(d):
        yj = x[:, j]
        others = np.delete(x, j, axis=1)
        design = np.column_stack([np.ones(n), others])
        coef, _, _, _ = np.linalg.lstsq(design, yj, rcond=None)
        resid = yj - design @ coef
        ss_res = float(resid @ resid)
        ss_tot = float(((yj - yj.mean()) ** 2).sum())
        r2 = 1.0 - ss_res / ss_tot
        # only numerically exact collinearity is an error; near-duplicates
        # must surface as huge-but-finite VIFs
        if r2 >= 1.0 - 1e-14:
            corr = np.corrcoef(x, rowvar=False)
            partner = max(
                (k for k in range(d) if k != j), key=lambda k: abs(corr[j, k])
            )
            raise SingularDesign(
                f"columns '{m.names[j]}' and '{m.names[partner]}' are collinear"
            )
        vifs.append(1.0 / (1.0 - r2))

    order = sorted(range(d), key=lambda j: (-vifs[j], j))
    return FeatureRanking(
        names=[m.names[j] for j in order],
        scores=[vifs[j] for j in order],
        method="vif",
    )


def vif_screen(
    m: FeatureMatrix, threshold: float = 5.0, protected: tuple[str, ...] = ()
) -> tuple[list[str], list[str]]:
    """Drop the worst-VIF column until every VIF is below the threshold.

    Returns (retained names, dropped names in drop order). Protected
    columns are skipped when choosing the drop. A single surviving column
    trivially passes.
    """
    names = list(m.names)
    dropped = []
    current = m
    while len(names) >= 2:
        ranking = vif(current)
        by_name = dict(zip(ranking.names, ranking.scores))
        offenders = [nm for nm in ranking.names if by_name[nm] >= threshold]
        droppable = [nm for nm in offenders if nm not in protected]
        if not droppable:
            break
        victim = droppable[0]
        dropped.append(victim)
        names.remove(victim)
        current = current.subset(names)
    return names, dropped


def two_stage_select(
    m: FeatureMatrix,
    labels,
    k_best: int = 50,
    n_target: int = 7,
    force_include: tuple[str, ...] = (),
    force_exclude: tuple[str, ...] = (),
    vif_threshold: float = 5.0,
    l2: float = 1e-6,
) -> dict:
    """Filter to k_best by F-test, eliminate to n_target, screen by VIF.

    force_include pins expert-chosen features through every stage;
    force_exclude removes features before scoring. k_best is clamped to
    the available dimension count. Returns the three stage rankings plus
    the final retained list.
    """
    for name in list(force_include) + list(force_exclude):
        if name not in m.names:
            raise KeyError(f"unknown feature '{name}'")
    overlap = set(force_include) & set(force_exclude)
    if overlap:
        raise ValueError(f"features {sorted(overlap)} both included and excluded")

    working_names = [nm for nm in m.names if nm not in force_exclude]
    working = m.subset(working_names)

    k_eff = min(k_best, len(working.names))
    filtered = select_k_best(working, labels, k=k_eff)
    filter_names = list(filtered.names)
    for name in force_include:
        if name not in filter_names:
            filter_names.append(name)

    stage2 = working.subset([nm for nm in working.names if nm in filter_names])
    n_eff = min(n_target, len(stage2.names))
    ranking = rfe(stage2, labels, n_target=n_eff, l2=l2, protected=force_include)

    stage3 = working.subset(ranking.names)
    if len(ranking.names) >= 2:
        final_names, vif_dropped = vif_screen(
            stage3, threshold=vif_threshold, protected=force_include
        )
        vif_ranking = vif(working.subset(final_names)) if len(final_names) >= 2 else None
    else:
        final_names, vif_dropped = list(ranking.names), []
        vif_ranking = None

    return {
        "f_test": filtered,
        "rfe": ranking,
        "vif": vif_ranking,
        "vif_dropped": vif_dropped,
        "selected": final_names,
    }
