"""Single-column identification from covariance rows, and the deflation driver.

A column of ``A`` is recovered from two rows ``i1, i2`` of the covariance:
the indices ``k`` where ``gamma_i2(k) / gamma_i1(k)`` takes its most common
value (step 1) form a set ``L`` mostly inside the column support; the column
is then read off, up to scale, as the entrywise median of
``gamma_i(L) / gamma_i1(L)`` (step 2) and rescaled using ``Sigma[i1, i2]``.

Two variants are provided: :func:`scip_population` for an exact covariance
(mode of exact ratios) and :func:`scip` for an approximate one (mode over the
logarithmic grid ``+-exp(eps * Z)``). :func:`recover` repeatedly applies one
of them, verifies each candidate by a sparsity test and deflates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .model import CovarianceInput

logger = logging.getLogger(__name__)

EPS_FLOOR = 1e-12


class NoCandidateError(ValueError):
    """Raised when a ratio set is empty so no mode exists."""


@dataclass(frozen=True)
class ScipParams:
    """Parameters of the finite-sample procedure and the deflation loop.

    ``None`` tolerances are resolved from the input by :func:`resolve_params`.

    c
        Axis-exclusion threshold: only indices where both rows exceed ``c`` in
        magnitude take part in the mode.
    eps
        Width of the logarithmic ratio bins.
    zero_tol
        Zero test for exact covariances; default ``1e-12 * |Sigma|_inf``.
    verify_tol
        Magnitude above which an entry counts as nonzero in the sparsity test.
    select_tol
        Minimum ``|Sigma[i1, i2]|`` for a pair to be drawn.
    max_iterations
        Cap on procedure invocations; default ``10 * r``.
    max_rejections
        Cap on consecutive rejected candidates; default ``50 * r``.
    mode_rtol
        Relative tolerance under which two exact ratios count as equal.
    """

    c: float = 0.01
    eps: float | None = None
    zero_tol: float | None = None
    verify_tol: float | None = None
    select_tol: float | None = None
    max_iterations: int | None = None
    max_rejections: int | None = None
    mode_rtol: float = 1e-9

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")
        for name in ("zero_tol", "verify_tol", "select_tol"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("max_iterations", "max_rejections"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ColumnCandidate:
    vector: np.ndarray | None
    pair: tuple[int, int]
    phi_hat: float | None = None
    support_set: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    accepted: bool = False
    reason: str = ""

    @property
    def ok(self) -> bool:
        """True when the procedure produced a vector (before verification)."""
        return self.vector is not None


@dataclass
class IterationLog:
    iteration: int
    pair: tuple[int, int]
    accepted: bool
    L_size: int
    reason: str


@dataclass
class RecoveryResult:
    columns: list[np.ndarray]
    iterations: int
    rejected_count: int
    residual: np.ndarray
    converged: bool
    log: list[IterationLog] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def A_hat(self) -> np.ndarray:
        r = self.residual.shape[0]
        if not self.columns:
            return np.zeros((r, 0))
        return np.column_stack(self.columns)


def lower_median(values: np.ndarray) -> float:
    """Order statistic ``ceil(m / 2)``; any strict-majority value is returned exactly."""
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[(v.size - 1) // 2])


def lower_median_rows(M: np.ndarray) -> np.ndarray:
    """Row-wise lower median, ignoring NaN entries (each row needs one finite value)."""
    m = M.shape[1]
    missing = np.isnan(M).sum(axis=1)
    if not missing.any():
        return np.partition(M, (m - 1) // 2, axis=1)[:, (m - 1) // 2]
    k = (m - missing - 1) // 2
    return np.take_along_axis(np.sort(M, axis=1), k[:, None], axis=1)[:, 0]


def l_set(gamma1, gamma2, phi: float, eps: float) -> np.ndarray:
    """Indices ``k`` with ``exp(-eps) <= gamma2[k] / (phi * gamma1[k]) < exp(eps)``.

    ``eps = 0`` is read as exact equality of the ratio with ``phi``.
    """
    if phi == 0:
        raise ValueError("phi must be nonzero")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = (g2 / g1) / phi
        if eps == 0:
            return np.flatnonzero(q == 1.0)
        return np.flatnonzero((q >= np.exp(-eps)) & (q < np.exp(eps)))


def _paired_bin_mode(bins: np.ndarray) -> tuple[int, int]:
    """Grid index ``m`` maximising ``#{b in {m - 1, m}}`` and that count.

    Ties go to the smallest ``|m|``, then to the larger ``m``.
    """
    both = np.concatenate([bins, bins + 1])
    values, counts = np.unique(both, return_counts=True)
    top = counts.max()
    cand = values[counts == top]
    order = np.lexsort((-cand, np.abs(cand)))
    return int(cand[order[0]]), int(top)


def ratio_mode_with_count(gamma1, gamma2, eps: float) -> tuple[float, int]:
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    if g1.size == 0:
        raise NoCandidateError("empty index set")
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = g2 / g1
    best = None
    for sign in (1.0, -1.0):
        sel = t[np.sign(t) == sign]
        if sel.size == 0:
            continue
        bins = np.floor(np.log(np.abs(sel)) / eps).astype(np.int64)
        m, count = _paired_bin_mode(bins)
        key = (count, -abs(m), sign)
        if best is None or key > best[0]:
            best = (key, sign * np.exp(eps * m), count)
    if best is None:
        raise NoCandidateError("all ratios are zero")
    return float(best[1]), int(best[2])


def ratio_mode(gamma1, gamma2, eps: float) -> float:
    """Grid point ``phi`` in ``+-exp(eps * Z)`` maximising ``|l_set(gamma1, gamma2, phi, eps)|``.

    Each sign class is binned by ``floor(log|ratio| / eps)``; counting every
    value in its own bin and the one above makes the count at grid index ``m``
    equal to the number of ratios inside ``[exp(eps (m - 1)), exp(eps (m + 1)))``.
    Ties prefer the larger count, then the smaller ``|log phi|``, then ``phi > 0``.
    """
    return ratio_mode_with_count(gamma1, gamma2, eps)[0]


def _exact_mode(t: np.ndarray, rtol: float) -> tuple[float, np.ndarray]:
    """Most frequent value of ``t`` where values within relative ``rtol`` coincide.

    Returns the representative value and the positions attaining it. Ties go to
    the larger class, then to the class containing the smallest position.
    """
    n = t.size
    order = np.argsort(t, kind="stable")
    ts = t[order]
    scale = np.abs(ts) * rtol
    hi = np.searchsorted(ts, ts + scale, side="right")
    counts = hi - np.arange(n)
    top = counts.max()
    starts = np.flatnonzero(counts == top)
    best_start = min(starts, key=lambda a: order[a:hi[a]].min())
    members = order[best_start:hi[best_start]]
    first = members.min()
    return float(t[first]), np.sort(members)


def _finish(Sigma: np.ndarray, i1: int, i2: int, L: np.ndarray, cand: ColumnCandidate) -> ColumnCandidate:
    """Median step and rescaling shared by both procedures."""
    cand.support_set = L
    if L.size == 0:
        cand.reason = "empty L"
        return cand
    # Sigma is symmetric: gather rows (contiguous) rather than columns
    ratios = Sigma[L, :] / Sigma[L, i1][:, None]
    m = L.size
    if m > 1:
        # row i of the median skips Sigma[i, i], which carries the noise variance
        ratios[np.arange(m), L] = np.inf
        k_full, k_short = (m - 1) // 2, (m - 2) // 2
        part = np.partition(ratios, [k_short, k_full], axis=0)
        a_tilde = part[k_full].copy()
        a_tilde[L] = part[k_short, L]
    else:
        a_tilde = ratios[0].copy()
    if a_tilde[i2] == 0:
        cand.reason = "a_tilde(i2) = 0"
        return cand
    radicand = Sigma[i1, i2] / a_tilde[i2]
    if not radicand > 0:
        cand.reason = "nonpositive radicand"
        return cand
    cand.vector = np.sqrt(radicand) * a_tilde
    return cand


def _check_pair(Sigma: np.ndarray, i1: int, i2: int) -> None:
    r = Sigma.shape[0]
    if i1 == i2:
        raise ValueError("i1 and i2 must differ")
    if not (0 <= i1 < r and 0 <= i2 < r):
        raise IndexError("pair index out of range")


def _matrix(S) -> np.ndarray:
    return S.matrix if isinstance(S, CovarianceInput) else np.asarray(S, dtype=float)


def scip_population(Sigma, i1: int, i2: int, zero_tol: float | None = None, mode_rtol: float = 1e-9) -> ColumnCandidate:
    """Exact-covariance procedure on the pair ``(i1, i2)``.

    ``K`` holds the indices other than ``i1, i2`` where both rows are nonzero
    (magnitude above ``zero_tol``); ``L`` is where the ratio equals its mode.
    """
    S = _matrix(Sigma)
    _check_pair(S, i1, i2)
    if zero_tol is None:
        zero_tol = 1e-12 * np.abs(S).max()
    cand = ColumnCandidate(vector=None, pair=(i1, i2))
    if not abs(S[i1, i2]) > zero_tol:
        cand.reason = "Sigma[i1, i2] is zero"
        return cand
    g1, g2 = S[i1], S[i2]
    mask = (np.abs(g1) > zero_tol) & (np.abs(g2) > zero_tol)
    mask[[i1, i2]] = False
    K = np.flatnonzero(mask)
    if K.size == 0:
        cand.reason = "empty K"
        return cand
    phi, pos = _exact_mode(g2[K] / g1[K], mode_rtol)
    cand.phi_hat = phi
    return _finish(S, i1, i2, K[pos], cand)


def scip(Sigma, i1: int, i2: int, c: float, eps: float) -> ColumnCandidate:
    """Finite-sample procedure on the pair ``(i1, i2)`` with threshold ``c`` and bin width ``eps``.

    ``K`` keeps indices other than ``i1, i2`` where both rows have magnitude at
    least ``c``; ``phi_hat`` is the grid mode of the ratios on ``K`` and ``L``
    the ratios within ``exp(+-2 eps)`` of it.
    """
    S = _matrix(Sigma)
    _check_pair(S, i1, i2)
    if not 0 < eps:
        raise ValueError("eps must be positive")
    cand = ColumnCandidate(vector=None, pair=(i1, i2))
    g1, g2 = S[i1], S[i2]
    mask = (np.abs(g1) >= c) & (np.abs(g2) >= c)
    mask[[i1, i2]] = False
    K = np.flatnonzero(mask)
    if K.size == 0:
        cand.reason = "empty K"
        return cand
    with np.errstate(over="ignore", under="ignore"):
        phi = ratio_mode(g1[K], g2[K], eps)
    cand.phi_hat = phi
    if phi == 0 or not np.isfinite(phi):
        cand.reason = "mode outside floating range"
        return cand
    L = K[l_set(g1[K], g2[K], phi, 2 * eps)]
    return _finish(S, i1, i2, L, cand)


def verify_column(Sigma_current, a_hat, verify_tol: float, zero_tol: float = 0.0,
                  pair: tuple[int, int] | None = None) -> bool:
    """Accept ``a_hat`` iff subtracting it makes ``Sigma(I x I)`` strictly sparser.

    ``I`` is the support of ``a_hat`` (entries above ``zero_tol``); an entry
    counts as nonzero when its magnitude exceeds ``verify_tol``. The rescaling
    step forces ``a_hat(i1) a_hat(i2) = Sigma[i1, i2]`` for the pair that
    produced the candidate, so those two entries cancel even for a wrong
    column and are left out of both counts. The pair is taken from a
    :class:`ColumnCandidate` or from ``pair``.
    """
    S = _matrix(Sigma_current)
    if isinstance(a_hat, ColumnCandidate):
        pair = a_hat.pair if pair is None else pair
        a_hat = a_hat.vector
    a = np.asarray(a_hat, dtype=float)
    I = np.flatnonzero(np.abs(a) > zero_tol)
    if I.size == 0:
        return False
    block = S[np.ix_(I, I)]
    resid = block - np.outer(a[I], a[I])
    keep = np.ones(block.shape, dtype=bool)
    if pair is not None:
        pos = {int(i): n for n, i in enumerate(I)}
        i1, i2 = pair
        if i1 in pos and i2 in pos:
            keep[pos[i1], pos[i2]] = keep[pos[i2], pos[i1]] = False
    before = int(np.sum((np.abs(block) > verify_tol) & keep))
    after = int(np.sum((np.abs(resid) > verify_tol) & keep))
    return after < before


def estimate_epsilon(Sigma, c: float, q: float = 0.5) -> float:
    """Bin width from the ``q``-quantile of off-diagonal magnitudes.

    Most entries of a sparse covariance are zero, so the median off-diagonal
    magnitude of ``Sigma_bar`` measures the sampling noise; returns
    ``max(4 * proxy / c, 1e-12)``.
    """
    S = _matrix(Sigma)
    r = S.shape[0]
    if r < 2:
        raise ValueError("need r >= 2")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return max(4.0 * noise_proxy(S, q) / c, EPS_FLOOR)


def noise_proxy(Sigma, q: float = 0.5) -> float:
    S = _matrix(Sigma)
    off = np.abs(S[~np.eye(S.shape[0], dtype=bool)])
    return float(np.quantile(off, q))


def resolve_params(Sigma: CovarianceInput, params: ScipParams) -> ScipParams:
    """Fill unset tolerances from the input (see :class:`ScipParams`)."""
    S = Sigma.matrix
    r = S.shape[0]
    scale = float(np.abs(S).max()) if S.size else 0.0
    zero_tol = params.zero_tol if params.zero_tol is not None else 1e-12 * scale
    eps = params.eps
    if Sigma.kind == "population":
        select = params.select_tol if params.select_tol is not None else zero_tol
        verify = params.verify_tol if params.verify_tol is not None else zero_tol
    else:
        if eps is None:
            eps = estimate_epsilon(S, params.c)
        if eps >= params.c:
            logger.info("eps=%.4g is not below c=%.4g; too few samples for the finite-sample guarantee", eps, params.c)
        proxy = noise_proxy(S) if r >= 2 else 0.0
        select = params.select_tol if params.select_tol is not None else max(params.c, 10 * proxy)
        verify = params.verify_tol if params.verify_tol is not None else select
    return replace(
        params,
        eps=eps,
        zero_tol=zero_tol,
        select_tol=select,
        verify_tol=verify,
        max_iterations=params.max_iterations or 10 * r,
        max_rejections=params.max_rejections or 50 * r,
    )


def canonical_sign(a: np.ndarray) -> np.ndarray:
    """Flip ``a`` so its largest-magnitude entry (first on ties) is positive."""
    k = int(np.argmax(np.abs(a)))
    return -a if a[k] < 0 else a


def recover(Sigma: CovarianceInput, params: ScipParams | None = None, rng: np.random.Generator | None = None) -> RecoveryResult:
    """Recover the columns of ``A`` from a covariance by verified deflation.

    Each iteration draws an ordered off-diagonal pair uniformly among entries
    with magnitude above ``select_tol``, runs the population procedure (for
    ``kind == "population"``) or the finite-sample one, and keeps the column
    only if it passes :func:`verify_column`; accepted columns are subtracted
    from the working matrix. Stops when no eligible pair remains
    (converged), or when the iteration or consecutive-rejection cap is hit.
    """
    if not isinstance(Sigma, CovarianceInput):
        Sigma = CovarianceInput(np.asarray(Sigma, dtype=float), kind="empirical")
    p = resolve_params(Sigma, params or ScipParams())
    rng = rng if rng is not None else np.random.default_rng(0)
    population = Sigma.kind == "population"
    W = np.array(Sigma.matrix, dtype=float)
    if population:
        W[np.abs(W) <= p.zero_tol] = 0.0
    r = W.shape[0]
    offdiag = ~np.eye(r, dtype=bool)

    columns: list[np.ndarray] = []
    log: list[IterationLog] = []
    iterations = rejected = streak = 0
    converged = False
    stop = ""
    while True:
        eligible = np.flatnonzero((np.abs(W) > p.select_tol) & offdiag)
        if eligible.size == 0:
            converged, stop = True, "no eligible off-diagonal entry"
            break
        if iterations >= p.max_iterations:
            stop = "max_iterations reached"
            break
        if streak >= p.max_rejections:
            stop = f"{streak} consecutive rejections"
            break
        i1, i2 = divmod(int(eligible[rng.integers(eligible.size)]), r)
        iterations += 1
        if population:
            cand = scip_population(W, i1, i2, zero_tol=p.zero_tol, mode_rtol=p.mode_rtol)
        else:
            cand = scip(W, i1, i2, p.c, p.eps)
        if cand.ok and verify_column(W, cand, p.verify_tol, p.zero_tol):
            a = canonical_sign(cand.vector)
            cand.accepted = True
            columns.append(a)
            W -= np.outer(a, a)
            if population:
                W[np.abs(W) <= p.zero_tol] = 0.0
            streak = 0
        else:
            if cand.ok:
                cand.reason = "verification failed"
            rejected += 1
            streak += 1
        log.append(IterationLog(iterations, (i1, i2), cand.accepted, int(cand.support_set.size), cand.reason))

    if not converged:
        logger.info("recovery stopped without converging: %s", stop)
    return RecoveryResult(
        columns=columns,
        iterations=iterations,
        rejected_count=rejected,
        residual=W,
        converged=converged,
        log=log,
        stop_reason=stop,
    )
