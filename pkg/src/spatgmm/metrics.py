"""Rand index and adjusted Rand index from exact integer pair counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels


def _comb2(x) -> int:
    x = int(x)
    return x * (x - 1) // 2


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @property
    def rows(self):
        return self.counts.sum(axis=1)

    @property
    def cols(self):
        return self.counts.sum(axis=0)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, labels_a, labels_b) -> "ContingencyTable":
        a, b = np.asarray(labels_a).ravel(), np.asarray(labels_b).ravel()
        if a.shape != b.shape:
            raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
        if a.size < 2:
            raise ValueError("need at least two observations")
        _, ca = np.unique(a, return_inverse=True)
        _, cb = np.unique(b, return_inverse=True)
        return cls(_kernels.contingency(ca.ravel(), cb.ravel(), ca.max() + 1, cb.max() + 1))

    def pair_sums(self):
        """``(sum C(n_ij, 2), sum C(a_i, 2), sum C(b_j, 2), C(N, 2))`` as Python ints."""
        nij = sum(_comb2(v) for v in self.counts[self.counts > 1])
        ai = sum(_comb2(v) for v in self.rows)
        bj = sum(_comb2(v) for v in self.cols)
        return nij, ai, bj, _comb2(self.n)


def ari(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index.

    When the chance-corrected denominator vanishes (both partitions all
    singletons or both a single cluster) the partitions coincide and 1.0 is
    returned.
    """
    nij, ai, bj, total = ContingencyTable.from_labels(labels_a, labels_b).pair_sums()
    # scale by 2 * total to stay in integers until the final division
    expected2 = 2 * ai * bj
    num = 2 * total * nij - expected2
    den = total * (ai + bj) - expected2
    if den == 0:
        return 1.0
    return num / den


def rand_index(labels_a, labels_b) -> float:
    """Fraction of observation pairs on which the two partitions agree."""
    nij, ai, bj, total = ContingencyTable.from_labels(labels_a, labels_b).pair_sums()
    agree = total + 2 * nij - ai - bj
    return agree / total


def match_components(true_labels, fitted_labels, n_fitted: int) -> dict[int, int]:
    """Map each true group (by rank of its label value) to the fitted
    component it overlaps most, one-to-one (Hungarian assignment)."""
    t = np.unique(true_labels, return_inverse=True)[1].ravel()
    counts = np.zeros((t.max() + 1, n_fitted), dtype=np.int64)
    np.add.at(counts, (t, np.asarray(fitted_labels).ravel()), 1)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return dict(zip(rows.tolist(), cols.tolist()))
