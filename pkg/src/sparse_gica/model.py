"""Problem instances: Bernoulli-Gaussian mixing matrices, covariances, data.

Conventions
-----------
- A mixing matrix is an ``(r, s)`` float array; column ``j`` is the loading
  vector of source ``j``. Zeros produced by :func:`sample_bg` are exact.
- Data matrices are ``(r, n)``: one column per observation.
- Randomness always comes from an explicit :class:`numpy.random.Generator`.
  :func:`derive_rng` builds independent sub-streams from one master seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats

Kind = Literal["population", "empirical"]


def derive_rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Return the generator for sub-stream ``(seed, tag, index)``.

    Streams with different tags or indices are statistically independent and
    do not depend on the order in which they are created.
    """
    key = (zlib.crc32(tag.encode("utf8")), int(index))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def as_mixing_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise ValueError(f"mixing matrix must be 2-d with positive dimensions, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("mixing matrix has non-finite entries")
    return A


def as_noise(noise, r: int) -> np.ndarray:
    """Normalise a noise specification to a length-``r`` variance vector.

    ``None`` means no noise; a scalar is broadcast to every coordinate.
    """
    if noise is None:
        return np.zeros(r)
    var = np.asarray(noise, dtype=float)
    if var.ndim == 0:
        var = np.full(r, float(var))
    if var.shape != (r,):
        raise ValueError(f"noise has length {var.shape[0] if var.ndim else 1}, expected {r}")
    if np.any(var < 0) or not np.all(np.isfinite(var)):
        raise ValueError("noise variances must be finite and nonnegative")
    return var


@dataclass(frozen=True)
class CovarianceInput:
    """A covariance matrix tagged with its provenance.

    ``kind`` is ``"population"`` for an exact ``A A^T + D`` and ``"empirical"``
    for a sample covariance built from ``n`` observations.
    """

    matrix: np.ndarray
    kind: Kind = "empirical"
    n: int | None = None

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
            raise ValueError(f"covariance must be square and nonempty, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("covariance has non-finite entries")
        scale = max(np.abs(M).max(), np.finfo(float).tiny)
        if np.abs(M - M.T).max() > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        if self.kind not in ("population", "empirical"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    def is_psd(self) -> bool:
        """Eigenvalue floor test: smallest eigenvalue >= -1e-9 * trace."""
        w = np.linalg.eigvalsh(self.matrix)
        return bool(w.min() >= -1e-9 * max(np.trace(self.matrix), 0.0))


def sample_bg(r: int, s: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``A ~ BG(r, s, theta)``: entries ``B * xi`` with ``B ~ Ber(theta)``, ``xi ~ N(0, 1)``."""
    if r <= 0 or s <= 0:
        raise ValueError("r and s must be positive")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    gate = rng.random((r, s)) < theta
    xi = rng.standard_normal((r, s))
    return np.where(gate, xi, 0.0)


def population_covariance(A, noise=None) -> CovarianceInput:
    """``A A^T + diag(noise)`` as a population covariance."""
    A = as_mixing_matrix(A)
    var = as_noise(noise, A.shape[0])
    M = A @ A.T
    M = 0.5 * (M + M.T)
    M[np.diag_indices_from(M)] = (A * A).sum(axis=1) + var
    return CovarianceInput(M, kind="population")


def sample_data(A, noise, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``X = A S + N`` with i.i.d. standard Gaussian sources, shape ``(r, n)``."""
    A = as_mixing_matrix(A)
    r, s = A.shape
    var = as_noise(noise, r)
    if n <= 0:
        raise ValueError("n must be positive")
    S = rng.standard_normal((s, n))
    X = A @ S
    if np.any(var > 0):
        X += np.sqrt(var)[:, None] * rng.standard_normal((r, n))
    return X


def empirical_covariance(X) -> CovarianceInput:
    """Sample covariance ``X X^T / n`` (no centering; the model is zero mean)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("X must be (r, n) with n >= 1")
    n = X.shape[1]
    M = (X @ X.T) / n
    M = 0.5 * (M + M.T)
    return CovarianceInput(M, kind="empirical", n=n)


def sample_empirical_covariance(A, noise, n: int, rng: np.random.Generator) -> CovarianceInput:
    """Draw ``Sigma_bar ~ W(A A^T + D, n)`` without materialising the data.

    Uses the factorisation ``X = F Z`` with ``F = [A, D^{1/2}]`` and ``Z``
    standard Gaussian, so ``X X^T / n = F (Z Z^T / n) F^T`` where
    ``Z Z^T ~ W(I, n)`` is drawn by the Bartlett construction. Cost is
    independent of ``n``. Falls back to :func:`sample_data` when ``n`` is
    smaller than the factor width.
    """
    A = as_mixing_matrix(A)
    r = A.shape[0]
    var = as_noise(noise, r)
    keep = var > 0
    F = np.hstack([A, np.diag(np.sqrt(var))[:, keep]])
    width = F.shape[1]
    if n < width:
        return empirical_covariance(sample_data(A, noise, n, rng))
    W = stats.wishart(df=n, scale=np.eye(width)).rvs(random_state=rng)
    W = np.atleast_2d(W)
    M = F @ (W / n) @ F.T
    M = 0.5 * (M + M.T)
    return CovarianceInput(M, kind="empirical", n=int(n))
