import time

import numpy as np
import pytest

from sparse_gica.harness import (
    TrialConfig,
    cells_csv,
    run_sweep,
    run_trial,
    summarize,
    trials_csv,
)
from sparse_gica.model import derive_rng, population_covariance, sample_bg
from sparse_gica.recovery import scip_population
from sparse_gica.structure import good_pair_cells


def test_config_requires_one_of_each():
    with pytest.raises(ValueError):
        TrialConfig(s=10, n=0)
    with pytest.raises(ValueError):
        TrialConfig(s=10, theta=0.1, alpha=0.5, n=0)
    with pytest.raises(ValueError):
        TrialConfig(s=10, theta=0.1)
    cfg = TrialConfig(s=100, alpha=0.5, beta=0.5)
    assert cfg.sparsity == pytest.approx(0.1) and cfg.samples == 100 and cfg.rows == 100


def test_zero_matrix_trial():
    rec = run_trial(TrialConfig(s=20, theta=0.0, n=0))
    assert rec.d_value == 0.0 and rec.iterations == 0 and rec.converged and not rec.failure


def test_population_trial_exact_when_oc_holds():
    exact = 0
    for t in range(6):
        rec = run_trial(TrialConfig(s=5, r=1000, theta=0.03, n=0, trial_index=t))
        if rec.oc_pass:
            exact += 1
            assert rec.d_value <= 1e-8
    assert exact > 0


def test_population_trial_at_s150_respects_certificate():
    # the overlap condition essentially never holds at this size; when it does, recovery must be exact
    for t in range(3):
        rec = run_trial(TrialConfig(s=150, alpha=0.7, n=0, trial_index=t))
        assert rec.d_value >= 0
        assert rec.h_eps_value >= 0
        if rec.oc_pass:
            assert rec.d_value <= 1e-8


def test_trial_is_deterministic():
    cfg = TrialConfig(s=40, alpha=0.6, beta=0.8, seed=12, trial_index=3)
    a, b = run_trial(cfg), run_trial(cfg)
    assert a == b
    assert a.wall_time > 0


def test_trial_failure_is_recorded():
    rec = run_trial(TrialConfig(s=10, theta=0.2, n=0, noise=-1.0))
    assert "ValueError" in rec.failure
    assert np.isnan(rec.d_value)


def test_single_cell_sweep_equals_lone_record():
    base = TrialConfig(s=30, alpha=0.6, beta=0.6, seed=5)
    cells, records = run_sweep([(0.6, 0.6)], 1, base)
    assert len(cells) == 1 and len(records) == 1
    assert cells[0] == summarize(0.6, 0.6, records)
    assert cells[0].median_d == records[0].d_value


def test_sweep_order_and_determinism():
    base = TrialConfig(s=25, alpha=0.6, beta=0.6, seed=1)
    grid = [(0.7, 0.5), (0.5, 0.9), (0.5, 0.4)]
    cells, records = run_sweep(grid, 3, base)
    keys = [(r.config.alpha, r.config.beta, r.config.trial_index) for r in records]
    assert keys == sorted(keys)
    assert [(c.alpha, c.beta) for c in cells] == sorted(grid)
    again = run_sweep(list(reversed(grid)), 3, base)
    assert cells_csv(again[0]) == cells_csv(cells)
    assert trials_csv(again[1], include_time=False) == trials_csv(records, include_time=False)


def test_sweep_independent_of_worker_count():
    base = TrialConfig(s=25, alpha=0.6, beta=0.6, seed=2)
    grid = [(0.6, 0.5), (0.8, 0.7)]
    serial = run_sweep(grid, 2, base, workers=1)
    parallel = run_sweep(grid, 2, base, workers=2)
    assert cells_csv(serial[0]) == cells_csv(parallel[0])
    assert trials_csv(serial[1], include_time=False) == trials_csv(parallel[1], include_time=False)


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError):
        run_sweep([], 1, TrialConfig(s=10, alpha=0.5, beta=0.5))


def test_csv_headers_and_precision():
    cells, records = run_sweep([(0.6, 0.6)], 2, TrialConfig(s=20, alpha=0.6, beta=0.6))
    text = cells_csv(cells)
    assert text.startswith("# sparse-gica-sweep/1\nalpha,beta,trials,median_d")
    assert "0.59999999999999998" in text  # 17 significant digits
    tt = trials_csv(records)
    assert tt.splitlines()[1].endswith("wall_time")
    assert not trials_csv(records, include_time=False).splitlines()[1].endswith("wall_time")


def test_phase_diagram_direction():
    base = TrialConfig(s=120, alpha=0.75, beta=0.6, seed=0, structure=False)
    cells, _ = run_sweep([(0.75, 0.6), (0.55, 0.05)], 20, base)
    inside = next(c for c in cells if c.alpha == 0.75)
    outside = next(c for c in cells if c.alpha == 0.55)
    assert inside.median_d < outside.median_d


def _scip_seconds(r, theta=0.1, s=20, reps=5):
    A = sample_bg(r, s, theta, derive_rng(0, "timing"))
    S = population_covariance(A).matrix
    tol = 1e-12 * np.abs(S).max()
    pairs = [p for cell in good_pair_cells(A) for p in cell if p[0] != p[1]][:60]
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        for i1, i2 in pairs:
            scip_population(S, i1, i2, zero_tol=tol)
        best = min(best, (time.perf_counter() - t0) / len(pairs))
    return best


def test_scip_cost_scales_quadratically_at_fixed_theta():
    ratio = _scip_seconds(2000) / _scip_seconds(1000)
    assert 2.5 <= ratio <= 6
