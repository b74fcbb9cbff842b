"""Metrics reporting and comparison functionality for convlim.

Turns verification reports and mutation detection tables into a per-suite
summary (passed and failed checks, checked cases, mutants run and killed),
writes it as JSON and CSV, and compares a run against a stored baseline.
"""
import json
from typing import Any, Dict, List, Optional
from pathlib import Path
from datetime import datetime

import pandas as pd

from .metrics_calculator import calculate_detection_rate

SUMMARY_COLUMNS = ["suite", "passed", "failed", "checked", "mutants", "killed", "kill_rate"]


def suite_summary(checks: List[Dict[str, Any]], detection: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """One row per suite with check counts and the mutant kill rate.

    Args:
        checks: Check dictionaries as found in a JSON report.
        detection: Detection table from ``convlim mutate --csv``; skipped
            mutants are left out of ``mutants`` and ``killed``.

    Returns:
        DataFrame with SUMMARY_COLUMNS, sorted by suite. ``kill_rate`` is
        NaN for a suite no mutant targets.
    """
    frame = pd.DataFrame(checks, columns=["suite", "passed", "checked"])
    frame["passed"] = frame["passed"].astype(bool)
    grouped = frame.groupby("suite").agg(
        passed=("passed", "sum"),
        failed=("passed", lambda s: int((~s).sum())),
        checked=("checked", "sum"),
    )
    if detection is not None and not detection.empty:
        ran = detection[~detection["skipped"].astype(bool)]
        kills = ran.groupby("suite").agg(mutants=("detected", "size"), killed=("detected", lambda s: int(s.astype(bool).sum())))
        grouped = grouped.join(kills, how="outer")
    for column in ("passed", "failed", "checked", "mutants", "killed"):
        if column not in grouped:
            grouped[column] = 0
        grouped[column] = grouped[column].fillna(0).astype(int)
    grouped["kill_rate"] = (grouped["killed"] / grouped["mutants"]).where(grouped["mutants"] > 0)
    return grouped.reset_index().rename(columns={"index": "suite"})[SUMMARY_COLUMNS].sort_values("suite", ignore_index=True)


def generate_json_report(metrics: Dict[str, Any], output_path: str,
                         checks: Optional[List[Dict[str, Any]]] = None,
                         detection: Optional[pd.DataFrame] = None) -> None:
    """Write metrics plus, when checks are given, the per-suite summary.

    Args:
        metrics: Dictionary of metrics to report.
        output_path: Path to output JSON file.
        checks: Check dictionaries for the ``suites`` section.
        detection: Detection table; adds the overall ``kill_rate``.
    """
    output_file = Path(output_path)
    output_file.parent.mkdir(parents=True, exist_ok=True)

    report: Dict[str, Any] = {"timestamp": datetime.now().isoformat(), "metrics": metrics}
    if checks is not None:
        summary = suite_summary(checks, detection)
        report["suites"] = json.loads(summary.to_json(orient="records"))
    if detection is not None:
        report["kill_rate"] = calculate_detection_rate(detection)

    with open(output_file, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, ensure_ascii=False)


def generate_csv_report(checks: List[Dict[str, Any]], output_path: str,
                        detection: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """Write the per-suite summary as CSV and return it."""
    output_file = Path(output_path)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    summary = suite_summary(checks, detection)
    summary.to_csv(output_file, index=False)
    return summary


# Lower is better for these; higher for every other numeric metric.
LOWER_IS_BETTER = {"latency_mean", "latency_max", "skip_rate", "sample_max_deviation"}


def compare_metrics(baseline: Dict[str, Any], current: Dict[str, Any]) -> Dict[str, Any]:
    """Compare a run against a baseline side by side.

    Args:
        baseline: Metrics of the stored baseline run.
        current: Metrics of the current run.

    Returns:
        Dictionary with both inputs, per-metric differences and the names
        of metrics that got worse.
    """
    comparison: Dict[str, Any] = {
        "baseline": baseline,
        "current": current,
        "differences": {},
        "regressions": [],
    }

    for metric in sorted(set(baseline) & set(current)):
        old, new = baseline[metric], current[metric]
        if isinstance(old, bool) or isinstance(new, bool):
            continue
        if not isinstance(old, (int, float)) or not isinstance(new, (int, float)):
            continue
        diff = new - old
        comparison["differences"][metric] = {
            "baseline": old,
            "current": new,
            "difference": diff,
            "percent_change": (diff / old * 100) if old != 0 else 0.0,
        }
        worse = diff > 0 if metric in LOWER_IS_BETTER else diff < 0
        # latency is reported, never flagged
        if worse and not metric.startswith("latency"):
            comparison["regressions"].append(metric)

    return comparison


def generate_comparison_report(baseline: Dict[str, Any],
                               current: Dict[str, Any],
                               output_dir: str) -> Dict[str, Any]:
    """Write metrics_comparison.json and metrics_comparison.csv into output_dir.

    The CSV has one row per compared metric with a ``regression`` flag.

    Returns:
        The comparison dictionary.
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    comparison = compare_metrics(baseline, current)
    generate_json_report(comparison, str(output_path / "metrics_comparison.json"))
    frame = pd.DataFrame.from_dict(comparison["differences"], orient="index",
                                   columns=["baseline", "current", "difference", "percent_change"])
    frame["regression"] = frame.index.isin(comparison["regressions"])
    frame.rename_axis("metric").reset_index().to_csv(output_path / "metrics_comparison.csv", index=False)

    print(f"Metrics reports generated in {output_dir}")
    print("  - metrics_comparison.json")
    print("  - metrics_comparison.csv")
    return comparison
