"""Combinatorial structure of a known mixing matrix.

These quantities certify ahead of time whether covariance-only recovery can
succeed on a given ``A``: column/row supports, the overlap sets ``C[j, i]``
and their maxima ``m[j]``, the overlap condition, the false-collinearity
capacity ``h_eps`` and the good-pair cells.

All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEEP_THRESHOLD = 0.1


@dataclass(frozen=True)
class SupportIndex:
    column_supports: list[np.ndarray]
    row_supports: list[np.ndarray]

    @property
    def column_sizes(self) -> np.ndarray:
        return np.array([len(I) for I in self.column_supports])

    @property
    def row_sizes(self) -> np.ndarray:
        return np.array([len(R) for R in self.row_supports])


@dataclass(frozen=True)
class OCResult:
    """Per-column overlap-condition verdicts.

    ``margin[j] = |I_j| - 6 m_j - 2 |I_j \\ deep_j| - h``; column ``j`` passes
    iff its margin is strictly positive.
    """

    h: float
    margin: np.ndarray
    column_pass: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.column_pass))


@dataclass(frozen=True)
class StructureReport:
    support_sizes: np.ndarray
    m: np.ndarray
    deep_supports: list[np.ndarray]
    oc_margin: np.ndarray
    oc_h: float
    h_eps_value: int
    eps: float
    good_pair_counts: np.ndarray

    @property
    def oc_pass(self) -> bool:
        return bool(np.all(self.oc_margin > 0))

    @property
    def deep_counts(self) -> np.ndarray:
        return np.array([len(d) for d in self.deep_supports])

    def summary(self) -> dict:
        s = len(self.m)
        return {
            "nonempty_columns": int(np.sum(self.support_sizes > 0)),
            "s": s,
            "eps": self.eps,
            "h_eps": self.h_eps_value,
            "oc_h": self.oc_h,
            "oc_pass": self.oc_pass,
            "oc_failing_columns": int(np.sum(self.oc_margin <= 0)),
            "max_m": int(self.m.max()) if s else 0,
            "min_support": int(self.support_sizes.min()) if s else 0,
            "max_support": int(self.support_sizes.max()) if s else 0,
        }


def _pattern(A) -> np.ndarray:
    return (np.asarray(A) != 0).astype(np.int64)


def supports(A) -> SupportIndex:
    B = np.asarray(A) != 0
    cols = [np.flatnonzero(B[:, j]) for j in range(B.shape[1])]
    rows = [np.flatnonzero(B[i, :]) for i in range(B.shape[0])]
    return SupportIndex(cols, rows)


def overlap_counts(A) -> np.ndarray:
    """Matrix ``counts[i, j] = |C[j, i]|`` for every row ``i`` and column ``j``.

    Uses ``N = B B^T`` (number of columns shared by two rows): ``l`` belongs to
    the union of ``I_k`` over ``k in R_i \\ {j}`` iff ``N[i, l] - B[i, j] >= 1``
    (``l`` ranges over ``I_j`` so ``B[l, j] = 1``).
    """
    B = _pattern(A)
    N = B @ B.T
    P = (N >= 1).astype(np.int64)
    Q = (N >= 2).astype(np.int64)
    np.fill_diagonal(P, 0)
    np.fill_diagonal(Q, 0)
    return np.where(B == 1, Q @ B, P @ B)


def overlap_sets(A, pairs=None) -> tuple[dict[tuple[int, int], set[int]], np.ndarray]:
    """Overlap sets ``C[(j, i)]`` and per-column maxima ``m``.

    ``C[j, i]`` is the part of ``I_j \\ {i}`` covered by the other columns
    that touch row ``i``. ``pairs`` selects which ``(j, i)`` sets to
    materialise; by default every nonempty one. ``m`` always covers all rows.
    """
    B = np.asarray(A) != 0
    r, s = B.shape
    m = overlap_counts(A).max(axis=0) if r else np.zeros(s, dtype=int)
    if pairs is None:
        counts = overlap_counts(A)
        pairs = [(j, i) for i, j in zip(*np.nonzero(counts))]
    N = B.astype(np.int64) @ B.T.astype(np.int64)
    C = {}
    for j, i in pairs:
        Ij = np.flatnonzero(B[:, j])
        need = 2 if B[i, j] else 1
        C[(j, i)] = {int(l) for l in Ij if l != i and N[i, l] >= need}
    return C, m


def deep_supports(A, threshold: float = DEEP_THRESHOLD) -> list[np.ndarray]:
    A = np.asarray(A)
    return [np.flatnonzero(np.abs(A[:, j]) >= threshold) for j in range(A.shape[1])]


def oc_check(A, h: float) -> OCResult:
    """Evaluate ``6 m_j + 2 |I_j \\ deep_j| + h < |I_j|`` for every column."""
    A = np.asarray(A)
    sizes = (A != 0).sum(axis=0)
    shallow = ((A != 0) & (np.abs(A) < DEEP_THRESHOLD)).sum(axis=0)
    m = overlap_counts(A).max(axis=0)
    margin = sizes - 6 * m - 2 * shallow - h
    return OCResult(h=float(h), margin=margin.astype(float), column_pass=margin > 0)


def good_pair_mask(A) -> np.ndarray:
    """Boolean ``(r, r)``: True where the two rows share exactly one column."""
    B = _pattern(A)
    return (B @ B.T) == 1


def good_pair_cells(A) -> list[list[tuple[int, int]]]:
    """For each column ``j``, the ordered pairs ``(i1, i2)`` with ``R_i1 & R_i2 == {j}``.

    Diagonal pairs ``(i, i)`` belong to the cell of ``j`` when row ``i`` has
    ``j`` as its only nonzero.
    """
    A = np.asarray(A)
    good = good_pair_mask(A)
    cells = []
    for j in range(A.shape[1]):
        Ij = np.flatnonzero(A[:, j])
        sub = good[np.ix_(Ij, Ij)]
        a, b = np.nonzero(sub)
        cells.append([(int(Ij[x]), int(Ij[y])) for x, y in zip(a, b)])
    return cells


def max_window_count(logs: np.ndarray, eps: float) -> int:
    """Largest number of sorted values falling in one window ``[x, x + 2 eps)``.

    With ``eps == 0`` the window degenerates to a single value and the result
    is the largest multiplicity.
    """
    if logs.size == 0:
        return 0
    x = np.sort(logs)
    if eps == 0:
        _, counts = np.unique(x, return_counts=True)
        return int(counts.max())
    hi = np.searchsorted(x, x + 2 * eps, side="left")
    return int((hi - np.arange(x.size)).max())


def h_eps(A, eps: float) -> int:
    """Worst-case count of off-support indices whose covariance-row ratios line up.

    For every column ``j`` and every ordered good pair ``(i1, i2)`` of its
    cell with ``i1 != i2``, ratios ``gamma_i2(k) / gamma_i1(k)`` of
    ``Sigma = A A^T`` are taken over ``k`` outside ``I_j`` with both entries
    nonzero. The supremum over ``phi`` of the window count is realised by a
    window anchored at a data point, so a sorted sweep per sign class is exact.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    A = np.asarray(A, dtype=float)
    Sigma = A @ A.T
    good = good_pair_mask(A)
    best = 0
    for j in range(A.shape[1]):
        Ij = np.flatnonzero(A[:, j])
        if Ij.size < 2:
            continue
        outside = np.ones(A.shape[0], dtype=bool)
        outside[Ij] = False
        G = Sigma[np.ix_(Ij, outside)]
        for a in range(Ij.size):
            ga = G[a]
            for b in range(Ij.size):
                if a == b or not good[Ij[a], Ij[b]]:
                    continue
                gb = G[b]
                ok = (ga != 0) & (gb != 0)
                if ok.sum() <= best:
                    continue
                t = gb[ok] / ga[ok]
                pos, neg = t[t > 0], t[t < 0]
                best = max(
                    best,
                    max_window_count(np.log(pos), eps),
                    max_window_count(np.log(-neg), eps),
                )
    return best


def structure_report(A, eps: float = 0.0, h: float | None = None) -> StructureReport:
    """Collect the structural certificate of ``A``.

    ``h`` defaults to ``h_eps(A, eps)``, i.e. the report evaluates the
    overlap condition at the level required for recovery at accuracy ``eps``.
    """
    A = np.asarray(A, dtype=float)
    hv = h_eps(A, eps)
    oc = oc_check(A, hv if h is None else h)
    m = overlap_counts(A).max(axis=0)
    good = good_pair_mask(A)
    B = A != 0
    gp = np.array([int(good[np.ix_(B[:, j], B[:, j])].sum()) for j in range(A.shape[1])])
    return StructureReport(
        support_sizes=B.sum(axis=0),
        m=m,
        deep_supports=deep_supports(A),
        oc_margin=oc.margin,
        oc_h=oc.h,
        h_eps_value=hv,
        eps=float(eps),
        good_pair_counts=gp,
    )
