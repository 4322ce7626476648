"""Threshold-weighted SMOTE for a continuous survival-time target.

Instances are sampled with probability proportional to the weight of the
time interval they fall in, then synthesized by averaging the targets and
feature vectors of the k nearest neighbors plus uniform noise. Each
synthetic sample owns an RNG substream derived from its index, so output
is identical regardless of how the synthesis loop is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewInstances
from .preprocess import FeatureMatrix


@dataclass
class SmoteConfig:
    thresholds: tuple[float, ...] = (7.0, 35.0)
    weights: tuple[float, ...] = (40.0, 20.0, 1.0)
    n_synthetic: int = 2000
    k_neighbors: int = 5
    noise_delta: float | None = None  # None = 0.05 * sd(y)
    seed: int = 0
    pool_size: int | None = None  # None = use exactly the k nearest

    def __post_init__(self):
        self.thresholds = tuple(float(t) for t in self.thresholds)
        self.weights = tuple(float(w) for w in self.weights)
        if list(self.thresholds) != sorted(set(self.thresholds)):
            raise ValueError("thresholds must be strictly ascending")
        if len(self.weights) != len(self.thresholds) + 1:
            raise ValueError("need one weight per interval (len(thresholds)+1)")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if self.n_synthetic < 0:
            raise ValueError("n_synthetic must be nonnegative")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be positive")
        if self.noise_delta is not None and self.noise_delta < 0:
            raise ValueError("noise_delta must be nonnegative")
        if self.pool_size is not None and self.pool_size < self.k_neighbors:
            raise ValueError("pool_size must be at least k_neighbors")

    def to_dict(self):
        return {
            "thresholds": list(self.thresholds),
            "weights": list(self.weights),
            "n_synthetic": self.n_synthetic,
            "k_neighbors": self.k_neighbors,
            "noise_delta": self.noise_delta,
            "seed": self.seed,
            "pool_size": self.pool_size,
        }


def interval_index(y, thresholds) -> np.ndarray:
    """Right-closed interval index per value: interval i is (T_{i-1}, T_i]."""
    y = np.asarray(y, dtype=np.float64)
    return np.searchsorted(np.asarray(thresholds, dtype=np.float64), y, side="left")


def sampling_probabilities(y, cfg: SmoteConfig) -> np.ndarray:
    """Per-instance seed probability: interval weight normalized over instances."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("y is empty")
    w = np.asarray(cfg.weights, dtype=np.float64)[interval_index(y, cfg.thresholds)]
    return w / w.sum()


def smote_augment(
    X: FeatureMatrix, y, cfg: SmoteConfig
) -> tuple[FeatureMatrix, np.ndarray]:
    """Append cfg.n_synthetic interpolated rows to (X, y).

    The seed instance is drawn by sampling_probabilities; its neighbor
    pool is the pool_size nearest rows by Euclidean distance in sd-scaled
    feature space (ties by row index, self excluded), from which
    k_neighbors are drawn without replacement when the pool is larger.
    Synthetic target = mean of neighbor targets + eps, eps ~ U(-delta,
    delta); synthetic features = mean of neighbor rows + independent
    U(-delta_j, delta_j) per column, with delta_j = delta scaled from
    target to column units via the sd ratio. Original rows pass through
    unchanged as the first n outputs.
    """
    y = np.asarray(y, dtype=np.float64)
    if X.missing_mask.any():
        raise ValueError("SMOTE requires a fully imputed matrix")
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("y length must match row count")
    if n < cfg.k_neighbors + 1:
        raise TooFewInstances(
            f"need at least k_neighbors+1={cfg.k_neighbors + 1} rows, got {n}"
        )
    pool_size = cfg.k_neighbors if cfg.pool_size is None else cfg.pool_size
    if n - 1 < pool_size:
        raise TooFewInstances(
            f"need at least pool_size+1={pool_size + 1} rows, got {n}"
        )

    sd_y = float(y.std(ddof=1)) if n > 1 else 0.0
    delta = 0.05 * sd_y if cfg.noise_delta is None else float(cfg.noise_delta)
    # Columnwise noise half-widths: rescale the target-unit delta by each
    # column's spread so the perturbation is proportionally equal.
    col_sd = X.values.std(axis=0, ddof=1)
    delta_cols = (delta / sd_y) * col_sd if sd_y > 0.0 else np.zeros(d)

    probs = sampling_probabilities(y, cfg)
    neighbors = _neighbor_table(X.values, pool_size)

    new_x = np.empty((cfg.n_synthetic, d))
    new_y = np.empty(cfg.n_synthetic)
    k = cfg.k_neighbors
    for i in range(cfg.n_synthetic):
        rng = np.random.default_rng(substream(cfg.seed, i))
        seed_row = rng.choice(n, p=probs)
        pool = neighbors[seed_row]
        if pool_size > k:
            chosen = pool[rng.choice(pool_size, size=k, replace=False)]
        else:
            chosen = pool
        new_y[i] = y[chosen].mean() + rng.uniform(-delta, delta)
        new_x[i] = X.values[chosen].mean(axis=0) + rng.uniform(-delta_cols, delta_cols)

    out = FeatureMatrix(
        values=np.vstack([X.values, new_x]),
        missing_mask=np.zeros((n + cfg.n_synthetic, d), dtype=bool),
        names=list(X.names),
        units=list(X.units),
    )
    return out, np.concatenate([y, new_y])


def _neighbor_table(values, pool_size):
    """pool_size nearest rows per row (self excluded, ties by row index).

    Distances use sd-scaled columns so the pool matches z-scored-space
    Euclidean ordering even when the input is raw.
    """
    n = values.shape[0]
    sd = values.std(axis=0, ddof=1)
    sd = np.where(sd == 0.0, 1.0, sd)
    scaled = values / sd
    sq = (scaled**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (scaled @ scaled.T)
    np.fill_diagonal(d2, np.inf)
    # argsort(kind="stable") on distances gives index-order tie-breaking
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :pool_size]


def substream(seed, *key) -> np.random.SeedSequence:
    """Substream keyed by position, so scheduling order cannot matter."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
