"""Compare the compiled kernels against the pure-Python fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Both backends are loaded directly, regardless of ICURISK_PURE_PYTHON, and
every timing case first checks that the two implementations agree on the
data being timed.
"""

import time

import numpy as np

from icurisk import _kernels
from icurisk._kernels import pyfallback

REPEATS = 5


def _best_of(fn, repeats=REPEATS):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _auroc_case(rng, n):
    scores = rng.random(n)
    labels = (rng.random(n) < 0.3).astype(np.float64)
    assert _kernels.auroc(scores, labels) == pyfallback.auroc(scores, labels)
    return (
        f"auroc n={n}",
        lambda: _kernels.auroc(scores, labels),
        lambda: pyfallback.auroc(scores, labels),
    )


def _cindex_case(rng, n):
    risk = rng.normal(0, 1, n)
    times = rng.uniform(1, 60, n)
    events = (rng.random(n) < 0.5).astype(np.float64)
    assert _kernels.cindex_counts(risk, times, events) == pyfallback.cindex_counts(
        risk, times, events
    )
    return (
        f"cindex n={n}",
        lambda: _kernels.cindex_counts(risk, times, events),
        lambda: pyfallback.cindex_counts(risk, times, events),
    )


def _knn_case(rng, n, d, k=5):
    raw = rng.normal(0, 10, (n, d))
    observed = rng.random((n, d)) > 0.15
    raw[~observed] = np.nan
    sd = np.empty(d)
    for j in range(d):
        col = raw[observed[:, j], j]
        s = col.std(ddof=1) if col.size > 1 else 1.0
        sd[j] = s if s > 0 else 1.0
    scaled = np.where(observed, raw / sd, 0.0)
    a = _kernels.knn_impute(raw.copy(), scaled, observed, k)
    b = pyfallback.knn_impute(raw.copy(), scaled, observed, k)
    assert np.allclose(a, b, rtol=0, atol=0)
    return (
        f"knn_impute {n}x{d}",
        lambda: _kernels.knn_impute(raw.copy(), scaled, observed, k),
        lambda: pyfallback.knn_impute(raw.copy(), scaled, observed, k),
    )


def main():
    if _kernels.BACKEND != "compiled":
        print("compiled backend unavailable; timing the fallback against itself")
    rng = np.random.default_rng(0)
    cases = [
        _auroc_case(rng, 2_000),
        _auroc_case(rng, 20_000),
        _cindex_case(rng, 500),
        _cindex_case(rng, 2_000),
        _knn_case(rng, 300, 20),
        _knn_case(rng, 1_000, 20),
    ]
    print(f"{'case':<22}{'compiled':>12}{'python':>12}{'speedup':>10}")
    for name, fast, slow in cases:
        t_fast = _best_of(fast)
        t_slow = _best_of(slow)
        print(f"{name:<22}{t_fast * 1e3:>10.2f}ms{t_slow * 1e3:>10.2f}ms{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
