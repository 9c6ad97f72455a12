"""Monte Carlo checks of the concentration bounds.

Each check draws from a fixed seed, compares an empirical violation
frequency with the bound's stated probability and reports pass/fail.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from . import concentration as conc
from .matrix_io import format_number
from .model import derive_rng, population_covariance, sample_bg, sample_empirical_covariance


@dataclass(frozen=True)
class ValidationResult:
    name: str
    trials: int
    observed: float
    allowed: float
    passed: bool
    detail: str = ""


def _result(name, trials, observed, allowed, detail=""):
    return ValidationResult(name, trials, float(observed), float(allowed), bool(observed <= allowed), detail)


def validate_okamoto(seed: int = 0, trials: int = 100_000, n: int = 1000, p: float = 0.1, eps: float = 0.05):
    X = derive_rng(seed, "okamoto").binomial(n, p, size=trials) / n
    lower, upper = conc.okamoto_tail(n, p, eps)
    return [
        _result("okamoto_upper", trials, np.mean(X >= p + eps), upper, f"n={n} p={p} eps={eps}"),
        _result("okamoto_lower", trials, np.mean(X <= p - eps), lower, f"n={n} p={p} eps={eps}"),
    ]


def validate_binomial_range(seed: int = 0, trials: int = 10_000, n: int = 2000, p: float = 0.02, delta: float = 0.05):
    X = derive_rng(seed, "binomial_range").binomial(n, p, size=trials)
    lo, hi = conc.binomial_range(n, p, delta)
    detail = f"n={n} p={p} delta={delta} range=({lo:.3f}, {hi:.3f})"
    return [
        _result("binomial_range_low", trials, np.mean(X <= lo), delta, detail),
        _result("binomial_range_high", trials, np.mean(X >= hi), delta, detail),
    ]


def validate_row_norm(seed: int = 0, trials: int = 200, r: int = 200, s: int = 200, theta: float = 0.05):
    threshold, prob = conc.row_norm_bound(r, s, theta)
    hits = 0
    for t in range(trials):
        A = sample_bg(r, s, theta, derive_rng(seed, "row_norm", t))
        hits += (A * A).sum(axis=1).max() > threshold
    return [_result("row_norm_bound", trials, hits / trials, min(prob, 1.0),
                    f"r={r} s={s} theta={theta} threshold={threshold:g} bound={prob:.4g}")]


def _test_covariance(r: int, seed: int) -> np.ndarray:
    A = sample_bg(r, r, 0.2, derive_rng(seed, "cov_instance"))
    return A, 0.5


def validate_covariance_deviation(seed: int = 0, trials: int = 1000, r: int = 20, n: int = 500, delta: float = 0.1):
    A, noise = _test_covariance(r, seed)
    Sigma = population_covariance(A, noise).matrix
    bound = conc.covariance_deviation(np.abs(Sigma).max(), r, delta, n)
    hits = 0
    for t in range(trials):
        S = sample_empirical_covariance(A, noise, n, derive_rng(seed, "cov_dev", t)).matrix
        hits += np.abs(S - Sigma).max() > bound
    return [_result("covariance_deviation", trials, hits / trials, delta, f"r={r} n={n} delta={delta} bound={bound:.4g}")]


def validate_plan_sample_size(seed: int = 0, trials: int = 200, r: int = 20, eps_target: float = 0.5, delta: float = 0.1):
    A, noise = _test_covariance(r, seed)
    Sigma = population_covariance(A, noise).matrix
    n = conc.plan_sample_size(np.abs(Sigma).max(), eps_target, r, delta)
    hits = 0
    for t in range(trials):
        S = sample_empirical_covariance(A, noise, n, derive_rng(seed, "plan", t)).matrix
        hits += np.abs(S - Sigma).max() > eps_target
    return [_result("plan_sample_size", trials, hits / trials, delta, f"r={r} n={n} eps_target={eps_target}")]


def run_all(seed: int = 0) -> list[ValidationResult]:
    out = []
    out += validate_okamoto(seed)
    out += validate_binomial_range(seed)
    out += validate_row_norm(seed)
    out += validate_covariance_deviation(seed)
    out += validate_plan_sample_size(seed)
    return out


def results_csv(results: list[ValidationResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(ValidationResult)]
    w.writerow(names)
    for res in results:
        row = []
        for k in names:
            v = getattr(res, k)
            if isinstance(v, bool):
                v = "pass" if v else "fail"
            elif isinstance(v, float):
                v = format_number(v) if math.isfinite(v) else str(v)
            row.append(v)
        w.writerow(row)
    return buf.getvalue()
