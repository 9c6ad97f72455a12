"""Binomial, Gaussian-norm and Wishart deviation bounds used for planning.

Every function returns the bound exactly as stated, even when it exceeds 1
(a valid but vacuous probability bound). Absolute constants that the theory
leaves unspecified are keyword arguments with fixed defaults.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field


@dataclass(frozen=True)
class BoundReport:
    name: str
    bound_value: float
    confidence: float | None = None
    inputs: dict = field(default_factory=dict)

    def capped(self) -> float:
        """The bound clipped to ``[0, 1]`` for display of probability bounds."""
        return min(self.bound_value, 1.0)


def okamoto_tail(n: int, p: float, eps: float) -> tuple[float, float]:
    """Okamoto bounds for ``X ~ Bin(n, p)``.

    Returns ``(P(X/n <= p - eps) bound, P(X/n >= p + eps) bound)``
    ``= (exp(-n eps^2 / 2p), exp(-n eps^2 / 6p))``; needs ``0 < p <= 1/2`` and
    ``0 <= eps <= 2p``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0 < p <= 0.5:
        raise ValueError("Okamoto bound needs 0 < p <= 1/2")
    if not 0 <= eps <= 2 * p:
        raise ValueError("Okamoto bound needs 0 <= eps <= 2p")
    return math.exp(-n * eps**2 / (2 * p)), math.exp(-n * eps**2 / (6 * p))


def binomial_range(n: int, p: float, delta: float) -> tuple[float, float]:
    """Range ``(3/4 np - 2 log(1/delta), 5/4 np + 6 log(1/delta))`` for ``Bin(n, p)``.

    Each side is violated with probability at most ``delta``.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    L = math.log(1 / delta)
    return 0.75 * n * p - 2 * L, 1.25 * n * p + 6 * L


def row_norm_bound(r: int, s: int, theta: float) -> tuple[float, float]:
    """``(5 s theta, r exp(-s theta / 6))``: ``P(|A A^T|_inf > 5 s theta)`` is at most the second value."""
    return 5 * s * theta, r * math.exp(-s * theta / 6)


def covariance_deviation(sigma_inf: float, r: int, delta: float, n: int) -> float:
    """Entrywise deviation ``6 |Sigma|_inf sqrt(log(r/delta) / n)`` of a Wishart sample covariance.

    Holds with probability ``1 - delta`` when ``delta < 1/2`` and
    ``n >= 2 log(r/delta)``.
    """
    if not 0 < delta < 0.5:
        raise ValueError("covariance deviation bound needs 0 < delta < 1/2")
    L = math.log(r / delta)
    if n < 2 * L:
        raise ValueError(f"covariance deviation bound needs n >= 2 log(r/delta) = {2 * L:.3f}")
    return 6 * sigma_inf * math.sqrt(L / n)


def theta_band(r: int, s: int, delta: float, C: float = 1.0, c: float = 1.0) -> tuple[float, float]:
    """Sparsity band ``C log(r/delta)/r <= theta <= c / (sqrt(s) + log(r/delta))``."""
    L = math.log(r / delta)
    return C * L / r, c / (math.sqrt(s) + L)


def theoretical_epsilon(r: int, s: int, theta: float, delta: float, c: float = 1.0,
                        band_C: float = 1.0, band_c: float = 1.0) -> float:
    """Bin width ``c / (s^2 theta^3 + log(r/delta))``; warns when ``theta`` is outside the band."""
    lo, hi = theta_band(r, s, delta, band_C, band_c)
    if not lo <= theta <= hi:
        warnings.warn(f"theta={theta:.4g} outside the band [{lo:.4g}, {hi:.4g}]", stacklevel=2)
    return c / (s**2 * theta**3 + math.log(r / delta))


def plan_sample_size(sigma_inf: float, eps_target: float, r: int, delta: float, C: float = 36.0) -> int:
    """Sample size ``ceil(C |Sigma|_inf^2 log(r/delta) / eps^2)``.

    With the default ``C = 36`` the entrywise deviation bound at this ``n``
    equals ``eps_target``.
    """
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    x = C * sigma_inf**2 * math.log(r / delta) / eps_target**2
    # absorb rounding in x so exact products are not bumped up by one
    return max(1, math.ceil(x * (1 - 1e-12)))
