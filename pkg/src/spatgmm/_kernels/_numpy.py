"""Pure-numpy reference implementations of the hot kernels."""

import numpy as np



def pairwise_distances(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    out = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def logsumexp_rows(a):
    m = a.max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def kmeans_assign(x, centers):
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels.astype(np.int64), d2[np.arange(x.shape[0]), labels]


def contingency(a, b, ka, kb):
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def spatial_covariance(index, levels, a1, a2, a3):
    out = a1 - a2 * levels[index]
    np.fill_diagonal(out, a1 + a3)
    return out
