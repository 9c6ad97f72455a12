"""Permutation- and sign-invariant recovery error.

``dist(A_hat, A) = min over permutations P and sign matrices D of
|A_hat P D - A|_inf``. Because the sup-norm of the whole matrix is the
maximum over matched columns, this is a bottleneck assignment problem: sort
the candidate column costs and binary-search the smallest threshold at which
a perfect matching exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching


@dataclass(frozen=True)
class Matching:
    """``permutation[k]`` is the column of ``A`` matched to column ``k`` of ``A_hat``
    (after zero-padding both to a common width); ``signs[k]`` multiplies ``A_hat[:, k]``."""

    permutation: np.ndarray
    signs: np.ndarray
    value: float
    costs: np.ndarray

    def aligned(self, A_hat) -> np.ndarray:
        """``A_hat`` permuted and sign-flipped into the column order of ``A``."""
        Ah = np.asarray(A_hat, dtype=float)
        width = self.permutation.size
        Ah = _pad(Ah, width)
        out = np.zeros_like(Ah)
        out[:, self.permutation] = Ah * self.signs
        return out


def _pad(M: np.ndarray, width: int) -> np.ndarray:
    if M.shape[1] >= width:
        return M
    return np.hstack([M, np.zeros((M.shape[0], width - M.shape[1]))])


def column_costs(A_hat, A) -> tuple[np.ndarray, np.ndarray]:
    """``cost[k, j] = min over sign of |sign * a_hat_k - a_j|_inf`` and the minimising signs."""
    Ah = np.asarray(A_hat, dtype=float)
    A = np.asarray(A, dtype=float)
    plus = np.empty((Ah.shape[1], A.shape[1]))
    minus = np.empty_like(plus)
    for k in range(Ah.shape[1]):
        col = Ah[:, k:k + 1]
        plus[k] = np.abs(col - A).max(axis=0)
        minus[k] = np.abs(col + A).max(axis=0)
    signs = np.where(minus < plus, -1.0, 1.0)
    return np.minimum(plus, minus), signs


def _perfect_matching(allowed: np.ndarray) -> np.ndarray | None:
    graph = csr_matrix(allowed.astype(np.int8))
    match = maximum_bipartite_matching(graph, perm_type="column")
    if np.any(match < 0):
        return None
    return match


def dist(A_hat, A) -> Matching:
    """Bottleneck-optimal matching of the columns of ``A_hat`` to those of ``A``.

    The narrower matrix is padded with zero columns, so a missing column costs
    its own sup-norm.
    """
    Ah = np.atleast_2d(np.asarray(A_hat, dtype=float))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if Ah.shape[0] != A.shape[0]:
        raise ValueError(f"row counts differ: {Ah.shape[0]} vs {A.shape[0]}")
    width = max(Ah.shape[1], A.shape[1])
    if width == 0:
        return Matching(np.zeros(0, dtype=int), np.zeros(0), 0.0, np.zeros((0, 0)))
    Ah, A = _pad(Ah, width), _pad(A, width)
    cost, signs = column_costs(Ah, A)
    levels = np.unique(cost)
    lo, hi = 0, levels.size - 1
    best = _perfect_matching(cost <= levels[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        match = _perfect_matching(cost <= levels[mid])
        if match is None:
            lo = mid + 1
        else:
            hi, best = mid, match
    perm = np.asarray(best, dtype=int)
    k = np.arange(width)
    return Matching(
        permutation=perm,
        signs=signs[k, perm],
        value=float(cost[k, perm].max()),
        costs=cost,
    )


def support_metrics(A_hat, A, tau: float, matching: Matching | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-column support precision and recall under the optimal matching.

    Supports are ``{i : |entry| > tau}``; returned arrays are indexed by the
    columns of ``A``. Empty recovered supports count as precision 1.
    """
    A = np.asarray(A, dtype=float)
    matching = matching or dist(A_hat, A)
    aligned = matching.aligned(A_hat)
    A = _pad(A, aligned.shape[1])
    est = np.abs(aligned) > tau
    true = np.abs(A) > tau
    hits = (est & true).sum(axis=0)
    n_est = est.sum(axis=0)
    n_true = true.sum(axis=0)
    precision = np.where(n_est > 0, hits / np.maximum(n_est, 1), 1.0)
    recall = np.where(n_true > 0, hits / np.maximum(n_true, 1), 1.0)
    return precision, recall
