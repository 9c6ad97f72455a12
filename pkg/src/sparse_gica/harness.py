"""Seeded end-to-end trials and (alpha, beta) sweeps.

A trial samples ``A ~ BG(r, s, theta)``, builds the population covariance
(and a Wishart sample covariance when ``n > 0``), evaluates the structural
certificate, runs verified deflation and scores the result with ``dist``.
Every random draw comes from a sub-stream keyed by the master seed, a tag
and the trial index, so trials can run in any order or in parallel.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .matrix_io import format_number
from .metrics import dist
from .model import derive_rng, population_covariance, sample_bg, sample_empirical_covariance
from .recovery import ScipParams, recover, resolve_params
from .structure import h_eps, oc_check

logger = logging.getLogger(__name__)

SWEEP_SCHEMA = "sparse-gica-sweep/1"
TRIALS_SCHEMA = "sparse-gica-trials/1"


@dataclass(frozen=True)
class TrialConfig:
    """One trial. Give exactly one of ``theta``/``alpha`` and of ``n``/``beta``.

    ``theta = s ** -alpha`` and ``n = round(s ** (2 beta))``; ``n = 0`` means
    the exact population covariance. ``r`` defaults to ``s``.
    """

    s: int
    r: int | None = None
    theta: float | None = None
    alpha: float | None = None
    n: int | None = None
    beta: float | None = None
    noise: float = 0.0
    c: float = 0.01
    eps: float | None = None
    select_tol: float | None = None
    verify_tol: float | None = None
    max_iterations: int | None = None
    seed: int = 0
    trial_index: int = 0
    success_threshold: float = 0.1
    structure: bool = True
    stream: str = ""

    def __post_init__(self):
        if (self.theta is None) == (self.alpha is None):
            raise ValueError("give exactly one of theta and alpha")
        if (self.n is None) == (self.beta is None):
            raise ValueError("give exactly one of n and beta")
        if self.s <= 0 or (self.r is not None and self.r <= 0):
            raise ValueError("r and s must be positive")

    @property
    def rows(self) -> int:
        return self.s if self.r is None else self.r

    @property
    def sparsity(self) -> float:
        return self.theta if self.theta is not None else self.s ** (-self.alpha)

    @property
    def samples(self) -> int:
        return self.n if self.n is not None else int(round(self.s ** (2 * self.beta)))

    def params(self) -> ScipParams:
        return ScipParams(c=self.c, eps=self.eps, select_tol=self.select_tol,
                          verify_tol=self.verify_tol, max_iterations=self.max_iterations)

    def rng(self, tag: str) -> np.random.Generator:
        return derive_rng(self.seed, f"{tag}|{self.stream}", self.trial_index)


@dataclass
class TrialRecord:
    config: TrialConfig
    d_value: float = math.nan
    iterations: int = 0
    columns: int = 0
    rejected: int = 0
    oc_pass: bool = False
    h_eps_value: int = -1
    eps_used: float = math.nan
    converged: bool = False
    failure: str = ""
    wall_time: float = field(default=0.0, compare=False)


def run_trial(config: TrialConfig) -> TrialRecord:
    """Run one trial; component errors are captured in ``failure`` instead of raised."""
    rec = TrialRecord(config=config)
    t0 = time.perf_counter()
    try:
        A = sample_bg(config.rows, config.s, config.sparsity, config.rng("A"))
        Sigma = population_covariance(A, config.noise)
        n = config.samples
        if n > 0:
            Sigma = sample_empirical_covariance(A, config.noise, n, config.rng("data"))
        params = resolve_params(Sigma, config.params())
        rec.eps_used = 0.0 if Sigma.kind == "population" else float(params.eps)
        if config.structure:
            rec.h_eps_value = h_eps(A, 2 * rec.eps_used)
            rec.oc_pass = oc_check(A, rec.h_eps_value).passed
        result = recover(Sigma, params, config.rng("alg"))
        rec.iterations = result.iterations
        rec.columns = len(result.columns)
        rec.rejected = result.rejected_count
        rec.converged = result.converged
        if not result.converged:
            rec.failure = result.stop_reason
        rec.d_value = dist(result.A_hat, A).value
    except Exception as exc:  # recorded, never fatal to a sweep
        logger.exception("trial %s failed", config)
        rec.failure = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - t0
    return rec


@dataclass(frozen=True)
class CellSummary:
    alpha: float
    beta: float
    trials: int
    median_d: float
    success_fraction: float
    mean_iterations: float
    oc_fraction: float
    converged_fraction: float
    failures: int


def summarize(alpha: float, beta: float, records: list[TrialRecord]) -> CellSummary:
    d = np.array([rec.d_value for rec in records], dtype=float)
    finite = d[np.isfinite(d)]
    thr = records[0].config.success_threshold if records else 0.1
    return CellSummary(
        alpha=alpha,
        beta=beta,
        trials=len(records),
        median_d=float(np.median(finite)) if finite.size else math.nan,
        success_fraction=float(np.mean(np.isfinite(d) & (d < thr))) if d.size else math.nan,
        mean_iterations=float(np.mean([rec.iterations for rec in records])) if records else math.nan,
        oc_fraction=float(np.mean([rec.oc_pass for rec in records])) if records else math.nan,
        converged_fraction=float(np.mean([rec.converged for rec in records])) if records else math.nan,
        failures=sum(1 for rec in records if rec.failure),
    )


def sweep_configs(grid, trials_per_cell: int, base: TrialConfig) -> list[TrialConfig]:
    if not grid:
        raise ValueError("grid is empty")
    out = []
    for alpha, beta in sorted(grid):
        for t in range(trials_per_cell):
            out.append(replace(base, theta=None, alpha=float(alpha), n=None, beta=float(beta),
                               trial_index=t, stream=f"alpha={alpha!r}|beta={beta!r}"))
    return out


def run_sweep(grid, trials_per_cell: int, base: TrialConfig, workers: int = 1):
    """Run every ``(alpha, beta)`` cell; returns ``(cell summaries, trial records)``.

    Output order is ``(alpha, beta, trial_index)`` whatever the worker count.
    """
    configs = sweep_configs(grid, trials_per_cell, base)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_trial, configs, chunksize=1))
    else:
        records = [run_trial(cfg) for cfg in configs]
    cells = []
    for k in range(0, len(records), trials_per_cell):
        chunk = records[k:k + trials_per_cell]
        cells.append(summarize(chunk[0].config.alpha, chunk[0].config.beta, chunk))
    return cells, records


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format_number(v) if math.isfinite(v) else str(v)
    if v is None:
        return ""
    return str(v)


def cells_csv(cells: list[CellSummary]) -> str:
    buf = io.StringIO()
    buf.write(f"# {SWEEP_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(CellSummary)]
    w.writerow(names)
    for cell in cells:
        w.writerow([_fmt(getattr(cell, k)) for k in names])
    return buf.getvalue()


TRIAL_COLUMNS = ["alpha", "beta", "trial_index", "r", "s", "theta", "n", "seed", "d_value",
                 "iterations", "columns", "rejected", "oc_pass", "h_eps_value", "eps_used",
                 "converged", "failure", "wall_time"]


def trial_row(rec: TrialRecord) -> dict:
    cfg = rec.config
    row = {k: v for k, v in asdict(rec).items() if k != "config"}
    row.update(alpha=cfg.alpha, beta=cfg.beta, trial_index=cfg.trial_index, r=cfg.rows, s=cfg.s,
               theta=cfg.sparsity, n=cfg.samples, seed=cfg.seed)
    return row


def trials_csv(records: list[TrialRecord], include_time: bool = True) -> str:
    cols = TRIAL_COLUMNS if include_time else TRIAL_COLUMNS[:-1]
    buf = io.StringIO()
    buf.write(f"# {TRIALS_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in records:
        row = trial_row(rec)
        w.writerow([_fmt(row[k]) for k in cols])
    return buf.getvalue()
