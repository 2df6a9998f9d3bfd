"""Plot-ready CSV tables built from aggregated reports."""

import logging
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from src.evaluation.transfer import NTReport

logger = logging.getLogger(__name__)

FIGURES = ("figure1a", "figure1b", "figure2a", "figure2b")


def _names(report: NTReport) -> tuple[str, ...]:
    return report.task_names or tuple(f"task{t}" for t in range(report.task_count))


def average_error_table(reports: Mapping[str, NTReport]) -> pd.DataFrame:
    """Mean metric and run-to-run std per method, STL first."""
    rows = []
    if reports:
        first = next(iter(reports.values()))
        rows.append(("STL", first.mean_stl, float(np.std(first.stl_run_means))))
    for variant, report in reports.items():
        rows.append((variant, report.mean_mtl, float(np.std(report.mtl_run_means))))
    return pd.DataFrame(rows, columns=["method", "mean_metric", "std_over_runs"])


def per_task_improvement_table(reports: Mapping[str, NTReport]) -> pd.DataFrame:
    """Improvement ``STL - variant`` per task; positive means the variant helped."""
    frames = []
    for variant, report in reports.items():
        frames.append(
            pd.DataFrame(
                {
                    "variant": variant,
                    "task_id": range(report.task_count),
                    "task_name": _names(report),
                    "improvement": -np.asarray(report.delta),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=["variant", "task_id", "task_name", "improvement"])
    return pd.concat(frames, ignore_index=True)


def mean_improvement_table(reports: Mapping[str, NTReport]) -> pd.DataFrame:
    """Mean STL metric minus mean variant metric, one row per variant."""
    rows = [
        (variant, r.mean_stl, r.mean_mtl, r.mean_stl - r.mean_mtl, r.nt_count)
        for variant, r in reports.items()
    ]
    return pd.DataFrame(
        rows, columns=["variant", "mean_stl", "mean_variant", "improvement", "nt_count"]
    )


def negative_transfer_table(reports: Mapping[str, NTReport]) -> pd.DataFrame:
    """Only the tasks with a positive delta, i.e. where the variant lost to STL."""
    improvements = per_task_improvement_table(reports)
    positive = improvements[improvements["improvement"] < 0].copy()
    positive["delta"] = -positive["improvement"]
    return positive[["variant", "task_id", "task_name", "delta"]].reset_index(drop=True)


def write_figure_data(reports: Mapping[str, NTReport], out_dir: Path) -> dict[str, Path]:
    """
    Write the four figure tables as CSV files.

    Args:
        reports: Aggregated report per multi-task variant
        out_dir: Destination directory (created if needed)

    Returns:
        Mapping from figure name to written path
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = {
        "figure1a": average_error_table(reports),
        "figure1b": per_task_improvement_table(reports),
        "figure2a": mean_improvement_table(reports),
        "figure2b": negative_transfer_table(reports),
    }
    paths = {}
    for name, table in tables.items():
        path = out_dir / f"{name}.csv"
        table.to_csv(path, index=False)
        paths[name] = path
    logger.info("wrote figure data for %d variants to %s", len(reports), out_dir)
    return paths
