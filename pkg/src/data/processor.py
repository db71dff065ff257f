"""
data processing and transformation utilities for run traces and metrics
"""

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

TRACE_COLUMNS = ["iter", "residual", "cost_estimate", "max_violation"]
SENSITIVITY_COLUMNS = ["iter", "zone", "delta", "argmax_bus", "sign"]


@dataclass(frozen=True)
class RunMetrics:
    run: int
    seed: int
    algorithm: str
    alpha: float
    final_cost: float
    centralized_cost: float
    optimality_loss: float
    iterations: int
    iterations_to_tol: float
    converged: bool
    final_residual: float
    residuals: tuple = field(default=(), repr=False)

    def as_row(self):
        row = asdict(self)
        row.pop("residuals")
        return row


def optimality_loss(cost, centralized_cost):
    """signed relative cost gap in percent; negative when a run lands below the optimum"""
    if centralized_cost == 0:
        return 0.0 if cost == 0 else float("inf")
    return (cost - centralized_cost) / abs(centralized_cost) * 100.0


def iterations_to_tol(residuals, tol):
    """first iteration (1-based) whose residual is within tol, nan if none"""
    hits = np.flatnonzero(np.asarray(residuals) <= tol)
    return float(hits[0] + 1) if hits.size else float("nan")


def trace_frame(run):
    """one row per admm iteration, with a status column per zone"""
    rows = []
    for rec in run.trace:
        row = {
            "iter": rec.iteration,
            "residual": rec.residual,
            "cost_estimate": rec.cost_estimate,
            "max_violation": rec.max_violation,
        }
        for zone_id, status in rec.statuses.items():
            row[f"status_{zone_id}"] = status.value
        rows.append(row)
    columns = TRACE_COLUMNS + [f"status_{z.zone_id}" for z in run.zones]
    return pd.DataFrame(rows, columns=columns)


def residual_envelope(residual_traces):
    """mean/min/max residual per iteration; finished runs hold their last value"""
    traces = [np.asarray(t, dtype=float) for t in residual_traces if len(t)]
    if not traces:
        return pd.DataFrame(columns=["iter", "mean", "min", "max"])
    length = max(t.size for t in traces)
    padded = np.vstack([np.pad(t, (0, length - t.size), mode="edge") for t in traces])
    return pd.DataFrame({
        "iter": np.arange(1, length + 1),
        "mean": padded.mean(axis=0),
        "min": padded.min(axis=0),
        "max": padded.max(axis=0),
    })


def metrics_frame(metrics):
    return pd.DataFrame([m.as_row() for m in metrics])


def summarize_metrics(df):
    """mean/min/max loss and mean iterations per (algorithm, alpha)"""
    grouped = df.groupby(["algorithm", "alpha"], sort=False)
    summary = grouped.agg(
        mean_loss=("optimality_loss", "mean"),
        min_loss=("optimality_loss", "min"),
        max_loss=("optimality_loss", "max"),
        mean_iterations=("iterations", "mean"),
        mean_iterations_to_tol=("iterations_to_tol", "mean"),
        converged_share=("converged", "mean"),
        runs=("run", "count"),
    )
    return summary.reset_index()


def sensitivity_frame(reports):
    """per-iteration sensitivity reports as a table"""
    rows = [
        {
            "iter": r.iteration,
            "zone": r.zone_id,
            "delta": r.value,
            "argmax_bus": r.argmax_bus,
            "sign": r.sign,
        }
        for r in reports
    ]
    return pd.DataFrame(rows, columns=SENSITIVITY_COLUMNS)


def sensitivity_summary(df, global_bounds):
    """max over iterations per zone next to the global bound"""
    local = df.groupby("zone")["delta"].max() if len(df) else pd.Series(dtype=float)
    rows = [
        {
            "zone": zone_id,
            "local_max": float(local.get(zone_id, 0.0)),
            "global_bound": float(bound),
        }
        for zone_id, bound in global_bounds.items()
    ]
    return pd.DataFrame(rows, columns=["zone", "local_max", "global_bound"])


def trend_spearman(x, y):
    """spearman rank correlation; nan when either side is constant"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(spearmanr(x, y).statistic)
