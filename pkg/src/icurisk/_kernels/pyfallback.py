"""NumPy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via
``ICURISK_PURE_PYTHON=1``). `auroc` and `cindex` are bit-identical to the
compiled versions: both accumulate sums of exact halves, so summation
order cannot change the result. `knn_impute` may differ from the compiled
kernel in the last ulp of a distance, which only matters on exact ties.
"""

import numpy as np

_KNN_BLOCK = 256


def auroc(scores, labels):
    """Rank-based AUROC, ties counted 0.5 (Mann-Whitney convention).

    Returns the probability that a random positive outscores a random
    negative. Caller guarantees both classes are present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    yy = y[order]
    # collapse tie groups; all counts are small integers => sums exact
    boundary = np.empty(ss.shape[0], dtype=bool)
    boundary[0] = True
    boundary[1:] = ss[1:] != ss[:-1]
    gid = np.cumsum(boundary) - 1
    pos_g = np.bincount(gid, weights=yy)
    cnt_g = np.bincount(gid).astype(np.float64)
    neg_g = cnt_g - pos_g
    neg_below = np.concatenate(([0.0], np.cumsum(neg_g)[:-1]))
    num = float(np.sum(pos_g * (neg_below + 0.5 * neg_g)))
    n_pos = float(yy.sum())
    n_neg = float(yy.shape[0] - n_pos)
    return num / (n_pos * n_neg)


def cindex_counts(risk, time, event):
    """Concordant mass and admissible-pair count for Harrell's C.

    A pair is admissible when the earlier subject has an observed event
    and strictly precedes the other subject's time. Risk ties add 0.5.
    """
    r = np.asarray(risk, dtype=np.float64)
    t = np.asarray(time, dtype=np.float64)
    e = np.asarray(event, dtype=bool)
    num = 0.0
    den = 0
    for i in np.flatnonzero(e):
        later = t > t[i]
        den += int(later.sum())
        ri = r[later]
        num += float((r[i] > ri).sum()) + 0.5 * float((r[i] == ri).sum())
    return num, den


def knn_impute(raw, scaled, observed, k):
    """Fill missing cells with the mean of the k nearest donors.

    Distances are root-mean-square differences over mutually observed
    columns of `scaled`; pairs sharing no column sit at +inf. Donors for
    cell (i, c) are the k rows nearest to i among rows with column c
    observed, ties broken by row index. Values are averaged from `raw`.
    """
    raw = np.asarray(raw, dtype=np.float64)
    obs = np.asarray(observed, dtype=bool)
    xz = np.where(obs, np.asarray(scaled, dtype=np.float64), 0.0)
    m = obs.astype(np.float64)
    sq = xz * xz
    out = raw.copy()
    targets = np.flatnonzero(~obs.all(axis=1))
    row_idx = np.arange(raw.shape[0])
    for start in range(0, targets.shape[0], _KNN_BLOCK):
        block = targets[start : start + _KNN_BLOCK]
        # squared distance over shared columns via three rank-d products
        cross = xz[block] @ xz.T
        s_self = sq[block] @ m.T
        s_other = m[block] @ sq.T
        shared = m[block] @ m.T
        with np.errstate(divide="ignore", invalid="ignore"):
            d2 = (s_self + s_other - 2.0 * cross) / shared
        d2[shared == 0] = np.inf
        for bi, i in enumerate(block):
            drow = d2[bi]
            for c in np.flatnonzero(~obs[i]):
                cand = row_idx[obs[:, c] & (row_idx != i)]
                order = np.lexsort((cand, drow[cand]))
                donors = cand[order[:k]]
                out[i, c] = _seq_mean(raw[donors, c])
    return out


def _seq_mean(values):
    # plain left-to-right sum, matching the compiled kernel exactly
    total = 0.0
    for v in values:
        total += float(v)
    return total / values.shape[0]
