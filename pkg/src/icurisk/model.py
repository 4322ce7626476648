"""Horizon-specific logistic models and a Cox proportional-hazards model.

Both fitters run damped Newton iterations to a gradient max-norm below
1e-8 and record convergence diagnostics. Fitting consumes z-scored
matrices; fitted models keep the normalization stats so prediction takes
raw clinical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingFeature, NoEvents, NonConvergence, SingleClass
from .preprocess import FeatureMatrix, NormStats

GRAD_TOL = 1e-8
MAX_ITER = 100
PROB_FLOOR = 1e-15
HORIZONS = (7, 14, 28)


@dataclass
class FitMeta:
    iterations: int
    grad_max_norm: float
    log_likelihood: float
    l2: float = 0.0

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "grad_max_norm": self.grad_max_norm,
            "log_likelihood": self.log_likelihood,
            "l2": self.l2,
        }


@dataclass
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    horizon_days: int
    feature_names: list[str]
    norm_stats: NormStats
    fit_meta: FitMeta

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("coefficients must be finite")
        if len(self.feature_names) != self.coefficients.shape[0]:
            raise ValueError("one name per coefficient required")

    def to_dict(self):
        return {
            "kind": "logistic",
            "horizon_days": self.horizon_days,
            "intercept": float(self.intercept),
            "coefficients": [float(c) for c in self.coefficients],
            "feature_names": list(self.feature_names),
            "norm_stats": self.norm_stats.to_dict(),
            "fit_meta": self.fit_meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            intercept=raw["intercept"],
            coefficients=np.asarray(raw["coefficients"], dtype=np.float64),
            horizon_days=raw["horizon_days"],
            feature_names=list(raw["feature_names"]),
            norm_stats=NormStats.from_dict(raw["norm_stats"]),
            fit_meta=FitMeta(**raw["fit_meta"]),
        )


@dataclass
class StepFunction:
    """Right-continuous step function, 0 before the first jump time."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("jump times must be strictly ascending")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("step values must be nondecreasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(idx < 0, 0.0, self.values[np.maximum(idx, 0)])
        return float(out) if out.ndim == 0 else out


@dataclass
class CoxModel:
    coefficients: np.ndarray
    baseline_cumhaz: StepFunction
    feature_names: list[str]
    norm_stats: NormStats
    fit_meta: FitMeta

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)

    def to_dict(self):
        return {
            "kind": "cox",
            "coefficients": [float(c) for c in self.coefficients],
            "feature_names": list(self.feature_names),
            "norm_stats": self.norm_stats.to_dict(),
            "baseline_cumhaz": {
                "times": [float(t) for t in self.baseline_cumhaz.times],
                "values": [float(v) for v in self.baseline_cumhaz.values],
            },
            "fit_meta": self.fit_meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            coefficients=np.asarray(raw["coefficients"], dtype=np.float64),
            baseline_cumhaz=StepFunction(
                times=raw["baseline_cumhaz"]["times"],
                values=raw["baseline_cumhaz"]["values"],
            ),
            feature_names=list(raw["feature_names"]),
            norm_stats=NormStats.from_dict(raw["norm_stats"]),
            fit_meta=FitMeta(**raw["fit_meta"]),
        )


def binarize_outcome(outcomes, horizon_days: float) -> np.ndarray:
    """1 iff the event occurred at or before the horizon; censored = 0."""
    return np.array(
        [1.0 if (o.event and o.time_days <= horizon_days) else 0.0 for o in outcomes]
    )


# --- logistic ----------------------------------------------------------------


def logistic_loglik_grad(design, labels, beta, l2, penalty_mask):
    """Penalized Bernoulli log-likelihood and its gradient at beta."""
    eta = design @ beta
    # log(1 + e^eta) without overflow
    ll = float(labels @ eta - np.logaddexp(0.0, eta).sum())
    pen = l2 * penalty_mask * beta
    ll -= 0.5 * float(beta @ pen)
    p = _sigmoid(eta)
    grad = design.T @ (labels - p) - pen
    return ll, grad, p


def fit_logistic(X: FeatureMatrix, labels, l2: float = 1e-6) -> LogisticModel:
    """Damped-Newton fit of the logistic model on a z-scored matrix.

    The ridge penalty applies to slopes only, keeping the intercept equal
    to the log-odds of the base rate under balanced null features; it
    guards against separation in oversampled data and is recorded in
    fit_meta.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValueError("labels must be 0/1")
    if not (np.any(labels == 1.0) and np.any(labels == 0.0)):
        raise SingleClass("labels contain a single class")
    if X.missing_mask.any():
        raise ValueError("fit requires a fully imputed matrix")
    if X.norm_stats is None:
        raise ValueError("fit requires a z-scored matrix carrying norm_stats")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")

    n, d = X.shape
    design = np.column_stack([np.ones(n), X.values])
    penalty_mask = np.concatenate([[0.0], np.ones(d)])
    beta = np.zeros(d + 1)

    ll, grad, p = logistic_loglik_grad(design, labels, beta, l2, penalty_mask)
    iterations = 0
    while True:
        gnorm = float(np.abs(grad).max())
        if gnorm < GRAD_TOL:
            break
        if iterations >= MAX_ITER:
            raise NonConvergence(
                f"logistic fit gradient max-norm {gnorm:.3e} after {iterations} iterations",
                iteration=iterations,
            )
        w = p * (1.0 - p)
        hess = design.T @ (design * w[:, None]) + l2 * np.diag(penalty_mask)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise NonConvergence(
                "singular Hessian in logistic fit", iteration=iterations
            ) from None
        scale, improved = 1.0, False
        for _ in range(40):
            cand = beta + scale * step
            cand_ll, cand_grad, cand_p = logistic_loglik_grad(
                design, labels, cand, l2, penalty_mask
            )
            if cand_ll > ll or (cand_ll == ll and np.abs(cand_grad).max() < gnorm):
                beta, ll, grad, p = cand, cand_ll, cand_grad, cand_p
                improved = True
                break
            scale *= 0.5
        iterations += 1
        if not improved:
            # Accept the float64 plateau: the gradient floor scales with
            # n·|ll|·eps, so large fits stall above the nominal tolerance
            # even when the Newton step is far below representable change.
            if gnorm < 1e-6 or float(np.abs(step).max()) < 1e-8:
                break
            raise NonConvergence(
                f"no ascent step found at iteration {iterations}", iteration=iterations
            )

    # report the unpenalized log-likelihood
    eta = design @ beta
    raw_ll = float(labels @ eta - np.logaddexp(0.0, eta).sum())
    meta = FitMeta(
        iterations=iterations,
        grad_max_norm=float(np.abs(grad).max()),
        log_likelihood=raw_ll,
        l2=l2,
    )
    return LogisticModel(
        intercept=float(beta[0]),
        coefficients=beta[1:],
        horizon_days=0,
        feature_names=list(X.names),
        norm_stats=X.norm_stats,
        fit_meta=meta,
    )


def _assemble(x, feature_names):
    """Raw input (dict or sequence) to a vector in feature_names order."""
    if isinstance(x, dict):
        absent = [nm for nm in feature_names if nm not in x or x[nm] is None]
        if absent:
            raise MissingFeature(f"missing values for {absent}")
        vec = np.array([float(x[nm]) for nm in feature_names])
    else:
        vec = np.asarray(x, dtype=np.float64)
        if vec.shape != (len(feature_names),):
            raise MissingFeature(
                f"expected {len(feature_names)} values, got shape {vec.shape}"
            )
    if not np.all(np.isfinite(vec)):
        raise MissingFeature("non-finite value in input vector")
    return vec


def logit_of(model: LogisticModel, x) -> float:
    vec = _assemble(x, model.feature_names)
    z = (vec - model.norm_stats.mean) / model.norm_stats.sd
    return float(model.intercept + z @ model.coefficients)


def predict_prob(model: LogisticModel, x) -> float:
    """Mortality probability for raw clinical values, clamped into (0, 1)."""
    p = _sigmoid(logit_of(model, x))
    return float(min(max(p, PROB_FLOOR), 1.0 - PROB_FLOOR))


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


# --- Cox proportional hazards -------------------------------------------------


def _risk_set_sums(x, eta, last_of_group, want_hessian):
    """Cumulative risk-set sums in descending-time order, inclusive of ties."""
    r = np.exp(eta)
    s0 = np.cumsum(r)[last_of_group]
    s1 = np.cumsum(r[:, None] * x, axis=0)[last_of_group]
    s2 = None
    if want_hessian:
        outer = r[:, None, None] * (x[:, :, None] * x[:, None, :])
        s2 = np.cumsum(outer, axis=0)[last_of_group]
    return s0, s1, s2


def cox_loglik_grad(x, times, events, beta, want_hessian=False):
    """Breslow-tie partial log-likelihood, gradient, optional Hessian.

    Rows must be sorted by descending time; `events` boolean.
    """
    n, d = x.shape
    last = np.empty(n, dtype=np.intp)
    j = 0
    while j < n:
        k = j
        while k + 1 < n and times[k + 1] == times[j]:
            k += 1
        last[j : k + 1] = k
        j = k + 1

    eta = x @ beta
    eta = eta - eta.max()  # stabilize exp; partial likelihood is shift-invariant
    s0, s1, s2 = _risk_set_sums(x, eta, last, want_hessian)
    ev = np.flatnonzero(events)
    ll = float(eta[ev].sum() - np.log(s0[ev]).sum())
    mean = s1[ev] / s0[ev, None]
    grad = (x[ev] - mean).sum(axis=0)
    if not want_hessian:
        return ll, grad, None
    hess = np.zeros((d, d))
    for i in ev:
        m = s1[i] / s0[i]
        hess -= s2[i] / s0[i] - np.outer(m, m)
    return ll, grad, hess


def fit_cox(X: FeatureMatrix, outcomes) -> CoxModel:
    """Newton fit of the Breslow partial likelihood plus baseline hazard."""
    if X.missing_mask.any():
        raise ValueError("fit requires a fully imputed matrix")
    if X.norm_stats is None:
        raise ValueError("fit requires a z-scored matrix carrying norm_stats")
    times = np.array([o.time_days for o in outcomes], dtype=np.float64)
    events = np.array([o.event for o in outcomes], dtype=bool)
    if times.shape[0] != X.shape[0]:
        raise ValueError("outcome count must match row count")
    if not events.any():
        raise NoEvents("no events observed; partial likelihood undefined")

    # descending time, stable so equal times keep input order
    order = np.argsort(-times, kind="stable")
    x = np.ascontiguousarray(X.values[order])
    t_sorted = times[order]
    e_sorted = events[order]

    d = X.shape[1]
    beta = np.zeros(d)
    ll, grad, _ = cox_loglik_grad(x, t_sorted, e_sorted, beta)
    iterations = 0
    while True:
        gnorm = float(np.abs(grad).max())
        if gnorm < GRAD_TOL:
            break
        if iterations >= MAX_ITER:
            raise NonConvergence(
                f"cox fit gradient max-norm {gnorm:.3e} after {iterations} iterations",
                iteration=iterations,
            )
        _, _, hess = cox_loglik_grad(x, t_sorted, e_sorted, beta, want_hessian=True)
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            raise NonConvergence(
                "singular Hessian in cox fit", iteration=iterations
            ) from None
        scale, improved = 1.0, False
        for _ in range(40):
            cand = beta + scale * step
            cand_ll, cand_grad, _ = cox_loglik_grad(x, t_sorted, e_sorted, cand)
            if cand_ll > ll or (cand_ll == ll and np.abs(cand_grad).max() < gnorm):
                beta, ll, grad = cand, cand_ll, cand_grad
                improved = True
                break
            scale *= 0.5
        iterations += 1
        if not improved:
            # same plateau rule as the logistic fit: a vanishing Newton
            # step means the optimum is resolved to float64 precision
            if gnorm < 1e-6 or float(np.abs(step).max()) < 1e-8:
                break
            raise NonConvergence(
                f"no ascent step found at iteration {iterations}", iteration=iterations
            )

    baseline = _breslow_baseline(x, t_sorted, e_sorted, beta)
    meta = FitMeta(
        iterations=iterations,
        grad_max_norm=float(np.abs(grad).max()),
        log_likelihood=ll,
    )
    return CoxModel(
        coefficients=beta,
        baseline_cumhaz=baseline,
        feature_names=list(X.names),
        norm_stats=X.norm_stats,
        fit_meta=meta,
    )


def _breslow_baseline(x, times_desc, events_desc, beta) -> StepFunction:
    """H0 jumps d_k / sum(exp(eta) over the risk set) at each event time."""
    r = np.exp(x @ beta)
    s0_run = np.cumsum(r)
    jump_times, jumps = [], []
    n = len(times_desc)
    j = 0
    while j < n:
        k = j
        while k + 1 < n and times_desc[k + 1] == times_desc[j]:
            k += 1
        d_k = int(events_desc[j : k + 1].sum())
        if d_k > 0:
            jump_times.append(times_desc[j])
            jumps.append(d_k / s0_run[k])
        j = k + 1
    jump_times.reverse()
    jumps.reverse()
    return StepFunction(
        times=np.asarray(jump_times), values=np.cumsum(np.asarray(jumps))
    )


def cox_survival(model: CoxModel, x, t: float) -> float:
    """S(t | x) under the proportional-hazards model, for raw values."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    vec = _assemble(x, model.feature_names)
    z = (vec - model.norm_stats.mean) / model.norm_stats.sd
    eta = float(z @ model.coefficients)
    return float(np.exp(-model.baseline_cumhaz(t) * np.exp(eta)))
