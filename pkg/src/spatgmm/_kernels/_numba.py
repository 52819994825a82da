"""numba-compiled versions of the kernels in ``_numpy``; same signatures and results."""

import math

import numpy as np
from numba import njit



@njit(cache=True)
def pairwise_distances(coords):
    p, m = coords.shape
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            acc = 0.0
            for k in range(m):
                t = coords[i, k] - coords[j, k]
                acc += t * t
            d = math.sqrt(acc)
            out[i, j] = d
            out[j, i] = d
    return out


@njit(cache=True)
def logsumexp_rows(a):
    n, g = a.shape
    out = np.empty(n)
    for i in range(n):
        m = -np.inf
        for k in range(g):
            if a[i, k] > m:
                m = a[i, k]
        if not np.isfinite(m):
            m = 0.0
        acc = 0.0
        for k in range(g):
            acc += math.exp(a[i, k] - m)
        out[i] = m + math.log(acc)
    return out


@njit(cache=True)
def kmeans_assign(x, centers):
    n, p = x.shape
    g = centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for i in range(n):
        bd = np.inf
        bk = 0
        for k in range(g):
            acc = 0.0
            for j in range(p):
                t = x[i, j] - centers[k, j]
                acc += t * t
            if acc < bd:
                bd = acc
                bk = k
        labels[i] = bk
        best[i] = bd
    return labels, best


@njit(cache=True)
def contingency(a, b, ka, kb):
    table = np.zeros((ka, kb), dtype=np.int64)
    for i in range(a.shape[0]):
        table[a[i], b[i]] += 1
    return table


@njit(cache=True)
def spatial_covariance(index, levels, a1, a2, a3):
    p = index.shape[0]
    out = np.empty((p, p))
    for i in range(p):
        out[i, i] = a1 + a3
        for j in range(i + 1, p):
            v = a1 - a2 * levels[index[i, j]]
            out[i, j] = v
            out[j, i] = v
    return out
