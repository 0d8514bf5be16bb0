"""Estimation-error metric and the Monte-Carlo benchmark harness.

The error between an estimated and a true loading matrix is the Frobenius
distance minimized over signed permutations of the columns.  Because the
squared distance decomposes into independent per-column costs, the exact
minimum is a linear assignment problem with cost

    c[j, k] = min(|est_k - true_j|^2, |est_k + true_j|^2),

solved by the Hungarian method.

The harness sweeps one parameter of a synthetic configuration over a grid
of (variant x init scheme x replication) cells.  All variants and init
schemes at the same (sweep value, replication) see the same dataset, so
comparisons between estimators are paired.  Seeds derive from the master
seed and the cell's labels (never from positional indices), so adding
grid points or reordering the grid does not perturb existing cells.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .estimator import EstimatorVariant, estimate_loading
from .initialization import InitScheme
from .model import SyntheticConfig, generate_dataset
from .rng import derive_seed, substream
from .rotation import RotationSolveConfig

__all__ = [
    "SWEEPABLE_PARAMETERS",
    "ExperimentGrid",
    "ExperimentRecord",
    "SummaryRow",
    "signed_permutation_error",
    "run_experiment",
    "aggregate",
    "records_to_csv",
    "summary_to_csv",
    "RECORDS_HEADER",
    "SUMMARY_HEADER",
]

SWEEPABLE_PARAMETERS = ("n", "p", "r", "varepsilon2", "theta")

RECORDS_HEADER = ("variant,init,sweep_name,sweep_value,rep,seed,error,"
                  "iters_total,fallback,runtime_ms")
SUMMARY_HEADER = ("variant,init,sweep_name,sweep_value,n_ok,n_fail,"
                  "mean,median,q25,q75")


# ---------------------------------------------------------------------------
# Error metric
# ---------------------------------------------------------------------------

def signed_permutation_error(lambda_hat: np.ndarray, lambda_true: np.ndarray):
    """Exact min over signed permutations P of |lambda_hat - lambda_true @ P|_F.

    Returns
    -------
    (error, p_opt) : (float, np.ndarray)
        The minimal Frobenius distance and an optimal r x r signed
        permutation matrix achieving it.
    """
    est = np.asarray(lambda_hat, dtype=float)
    true = np.asarray(lambda_true, dtype=float)
    if est.ndim != 2 or est.shape != true.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {true.shape}")
    r = est.shape[1]

    inner = true.T @ est                      # inner[j, k] = true_j . est_k
    est_sq = np.sum(est ** 2, axis=0)
    true_sq = np.sum(true ** 2, axis=0)
    cost = true_sq[:, None] + est_sq[None, :] - 2.0 * np.abs(inner)
    rows, cols = linear_sum_assignment(cost)

    p_opt = np.zeros((r, r))
    for j, k in zip(rows, cols):
        p_opt[j, k] = 1.0 if inner[j, k] >= 0 else -1.0
    # evaluate the distance directly so a perfect match is exactly zero
    # (the expanded per-column costs above cancel only approximately)
    error = float(np.linalg.norm(est - true @ p_opt))
    return error, p_opt


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentGrid:
    """One benchmark sweep: a base configuration with one varied parameter."""

    base: SyntheticConfig
    sweep_name: str
    sweep_values: tuple
    variants: tuple = (EstimatorVariant.BASE,)
    init_schemes: tuple = (InitScheme.method_of_moments(),)
    replications: int = 100
    master_seed: int = 0
    solve_config: RotationSolveConfig = field(default_factory=RotationSolveConfig)
    mom_subtraction: str = "as_written"
    auto_fallback: bool = True
    record_runtime: bool = False

    def __post_init__(self):
        if self.sweep_name not in SWEEPABLE_PARAMETERS:
            raise ValueError(f"sweep_name must be one of {SWEEPABLE_PARAMETERS}")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.variants or not self.init_schemes:
            raise ValueError("variants and init_schemes must be nonempty")
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(
            self, "variants", tuple(EstimatorVariant(v) for v in self.variants))
        object.__setattr__(self, "init_schemes", tuple(self.init_schemes))


@dataclass(frozen=True)
class ExperimentRecord:
    """One benchmark cell result; ``error`` is NaN on failure."""

    variant: str
    init: str
    sweep_name: str
    sweep_value: float
    rep: int
    seed: int
    error: float
    iter_counts: tuple = ()
    fallback: bool = False
    runtime_ms: float = 0.0
    failure: str = ""

    @property
    def iters_total(self) -> int:
        return int(sum(self.iter_counts))


@dataclass(frozen=True)
class SummaryRow:
    """Aggregated statistics for one (variant, init, sweep value) cell."""

    variant: str
    init: str
    sweep_name: str
    sweep_value: float
    n_ok: int
    n_fail: int
    mean: float
    median: float
    q25: float
    q75: float


_INT_SWEEPS = ("n", "p", "r")


def _cell_config(base: SyntheticConfig, sweep_name: str, value, seed: int) -> SyntheticConfig:
    typed = int(value) if sweep_name in _INT_SWEEPS else float(value)
    return replace(base, **{sweep_name: typed, "seed": seed})


def run_experiment(grid: ExperimentGrid, threads: int = 1) -> list:
    """Run every (sweep value x variant x init x replication) cell.

    Each cell's dataset seed derives from (master seed, sweep value,
    replication), shared across variants and init schemes; the estimation
    stream additionally keys on the variant and init labels.  Failures in
    a cell are recorded as NaN with a failure tag and never abort the
    sweep.  Output order is lexicographic in (value, variant, init, rep)
    regardless of the execution schedule or thread count.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")

    tasks = [
        (value, variant, scheme, rep)
        for value in grid.sweep_values
        for variant in grid.variants
        for scheme in grid.init_schemes
        for rep in range(grid.replications)
    ]

    def run_cell(task) -> ExperimentRecord:
        value, variant, scheme, rep = task
        data_seed = derive_seed(grid.master_seed, "data", grid.sweep_name,
                                value, rep)
        common = dict(variant=variant.value, init=scheme.label,
                      sweep_name=grid.sweep_name, sweep_value=value,
                      rep=rep, seed=data_seed)
        try:
            config = _cell_config(grid.base, grid.sweep_name, value, data_seed)
            observed, truth = generate_dataset(config)
            est_rng = substream(grid.master_seed, "estimate", variant.value,
                                scheme.label, grid.sweep_name, value, rep)
            t_start = time.perf_counter()
            estimate = estimate_loading(
                observed.data, config.r, variant, scheme, grid.solve_config,
                est_rng, auto_fallback=grid.auto_fallback,
                mom_subtraction=grid.mom_subtraction)
            elapsed_ms = (time.perf_counter() - t_start) * 1000.0
            error, _ = signed_permutation_error(estimate.lambda_hat, truth.loading)
            return ExperimentRecord(
                error=error,
                iter_counts=tuple(int(i) for i in estimate.diagnostics.iter_counts),
                fallback=estimate.diagnostics.fallback,
                runtime_ms=elapsed_ms if grid.record_runtime else 0.0,
                **common)
        except Exception as exc:  # failures must never abort the sweep
            return ExperimentRecord(
                error=float("nan"),
                failure=f"{type(exc).__name__}: {exc}",
                **common)

    if threads == 1:
        return [run_cell(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_cell, tasks))


def aggregate(records: Sequence[ExperimentRecord]) -> list:
    """Summarize records per cell: counts plus mean/median/quartiles.

    NaN-error records count as failures and are excluded from the
    statistics.  Cells appear in first-seen order.
    """
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict = {}
    for rec in records:
        key = (rec.variant, rec.init, rec.sweep_name, rec.sweep_value)
        groups.setdefault(key, []).append(rec)

    rows = []
    for (variant, init, sweep_name, sweep_value), cell in groups.items():
        errors = np.array([rec.error for rec in cell])
        ok = errors[np.isfinite(errors)]
        n_fail = int(errors.size - ok.size)
        if ok.size:
            mean, median = float(np.mean(ok)), float(np.median(ok))
            q25, q75 = (float(np.quantile(ok, 0.25)), float(np.quantile(ok, 0.75)))
        else:
            mean = median = q25 = q75 = float("nan")
        rows.append(SummaryRow(variant=variant, init=init, sweep_name=sweep_name,
                               sweep_value=sweep_value, n_ok=int(ok.size),
                               n_fail=n_fail, mean=mean, median=median,
                               q25=q25, q75=q75))
    return rows


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def records_to_csv(records: Sequence[ExperimentRecord], path) -> None:
    """Write records with the fixed benchmark header, one row per cell."""
    lines = [RECORDS_HEADER]
    for rec in records:
        lines.append(",".join([
            rec.variant,
            rec.init,
            rec.sweep_name,
            _format_value(rec.sweep_value),
            str(rec.rep),
            str(rec.seed),
            _format_value(rec.error),
            str(rec.iters_total),
            _format_value(rec.fallback),
            _format_value(rec.runtime_ms),
        ]))
    with open(path, "w", encoding="utf8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def summary_to_csv(rows: Sequence[SummaryRow], path) -> None:
    """Write per-cell summaries with the fixed summary header."""
    lines = [SUMMARY_HEADER]
    for row in rows:
        lines.append(",".join([
            row.variant,
            row.init,
            row.sweep_name,
            _format_value(row.sweep_value),
            str(row.n_ok),
            str(row.n_fail),
            _format_value(row.mean),
            _format_value(row.median),
            _format_value(row.q25),
            _format_value(row.q75),
        ]))
    with open(path, "w", encoding="utf8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
