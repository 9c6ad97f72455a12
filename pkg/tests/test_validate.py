"""Monte Carlo validation of the concentration bounds (fixed seeds).

Trial counts: okamoto 10^5 draws, binomial range 10^4 draws, row norm 200
instances of BG(200, 200, 0.05), covariance deviation 10^3 Wishart draws at
r = 20, planned sample size 200 draws.
"""

import numpy as np
import pytest

from sparse_gica import validate as val
from sparse_gica.model import derive_rng, population_covariance, sample_bg, sample_empirical_covariance
from sparse_gica import concentration as conc


@pytest.mark.parametrize("check", [
    val.validate_okamoto,
    val.validate_binomial_range,
    val.validate_row_norm,
    val.validate_covariance_deviation,
    val.validate_plan_sample_size,
])
def test_validation_passes(check):
    for res in check(seed=0):
        assert res.passed, res


def test_results_csv_layout():
    res = val.validate_okamoto(seed=0, trials=100)
    text = val.results_csv(res)
    lines = text.splitlines()
    assert lines[0] == "name,trials,observed,allowed,passed,detail"
    assert len(lines) == 3


def test_row_norm_bound_nonvacuous_regime():
    # large s theta so the probability bound is small; the event should be rare
    thr, prob = conc.row_norm_bound(50, 600, 0.2)
    hits = sum((sample_bg(50, 600, 0.2, derive_rng(1, "rn", t)) ** 2).sum(axis=1).max() > thr
               for t in range(200))
    assert hits / 200 <= prob


def test_covariance_deviation_tight_delta():
    A = sample_bg(10, 10, 0.3, derive_rng(2, "A"))
    Sigma = population_covariance(A, 1.0).matrix
    bound = conc.covariance_deviation(np.abs(Sigma).max(), 10, 0.01, 2000)
    hits = sum(np.abs(sample_empirical_covariance(A, 1.0, 2000, derive_rng(2, "w", t)).matrix - Sigma).max() > bound
               for t in range(500))
    assert hits / 500 <= 0.01
