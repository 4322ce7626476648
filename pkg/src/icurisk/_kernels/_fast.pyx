# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: AUROC, concordance counting, KNN imputation.

Mirrors `pyfallback` exactly; see that module for the contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def auroc(scores, labels):
    """Rank-based AUROC with ties counted 0.5."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(labels, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(s, kind="mergesort")
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i = 0, j
    cdef double pos_g, cnt_g, neg_g, neg_below = 0.0, num = 0.0, n_pos = 0.0
    cdef double cur
    while i < n:
        cur = s[order[i]]
        pos_g = 0.0
        cnt_g = 0.0
        j = i
        while j < n and s[order[j]] == cur:
            pos_g += y[order[j]]
            cnt_g += 1.0
            j += 1
        neg_g = cnt_g - pos_g
        num += pos_g * (neg_below + 0.5 * neg_g)
        neg_below += neg_g
        n_pos += pos_g
        i = j
    cdef double n_neg = <double> n - n_pos
    return num / (n_pos * n_neg)


def cindex_counts(risk, time, event):
    """(concordant mass, admissible pair count) for Harrell's C."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(risk, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(time, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] e = np.ascontiguousarray(event, dtype=np.uint8)
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t i, j
    cdef double num = 0.0
    cdef long long den = 0
    for i in range(n):
        if not e[i]:
            continue
        for j in range(n):
            if t[j] > t[i]:
                den += 1
                if r[i] > r[j]:
                    num += 1.0
                elif r[i] == r[j]:
                    num += 0.5
    return num, <object> den


def knn_impute(raw, scaled, observed, k):
    """Fill missing cells with the mean of the k nearest donors."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(raw, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = np.ascontiguousarray(scaled, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] obs = np.ascontiguousarray(observed, dtype=np.uint8)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t kk = k
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = x.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_d = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] best_i = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t i, j, c, m, p, q, filled
    cdef double acc, diff, inf = np.inf, dj
    cdef bint has_missing

    for i in range(n):
        has_missing = False
        for c in range(d):
            if not obs[i, c]:
                has_missing = True
                break
        if not has_missing:
            continue
        for j in range(n):
            acc = 0.0
            m = 0
            for c in range(d):
                if obs[i, c] and obs[j, c]:
                    diff = z[i, c] - z[j, c]
                    acc += diff * diff
                    m += 1
            dist[j] = acc / m if m > 0 else inf
        for c in range(d):
            if obs[i, c]:
                continue
            # running top-k donors ordered by (distance, row index)
            filled = 0
            for j in range(n):
                if j == i or not obs[j, c]:
                    continue
                dj = dist[j]
                if filled == kk and dj >= best_d[kk - 1]:
                    if dj > best_d[kk - 1] or j > best_i[kk - 1]:
                        continue
                p = filled if filled < kk else kk - 1
                while p > 0 and (best_d[p - 1] > dj or (best_d[p - 1] == dj and best_i[p - 1] > j)):
                    best_d[p] = best_d[p - 1]
                    best_i[p] = best_i[p - 1]
                    p -= 1
                best_d[p] = dj
                best_i[p] = j
                if filled < kk:
                    filled += 1
            acc = 0.0
            for q in range(filled):
                acc += x[best_i[q], c]
            out[i, c] = acc / filled
    return out
