"""Metrics calculation functions for convlim.

Provides functions to summarize verification reports, mutation detection
tables, suite timings and sampling deviations.
"""
from typing import Any, Dict, List, Optional
import statistics
from fractions import Fraction

import pandas as pd


def calculate_pass_rate(checks: List[Dict[str, Any]]) -> float:
    """Calculate the fraction of checks that passed.

    Args:
        checks: Check dictionaries as found in a JSON report.

    Returns:
        Pass rate between 0.0 and 1.0 (1.0 for an empty report).
    """
    if not checks:
        return 1.0
    return sum(1 for c in checks if c.get("passed")) / len(checks)


def calculate_checked_totals(checks: List[Dict[str, Any]]) -> Dict[str, int]:
    """Sum the exhaustive index-set sizes per suite.

    Args:
        checks: Check dictionaries as found in a JSON report.

    Returns:
        Mapping suite -> total number of checked cases.
    """
    totals: Dict[str, int] = {}
    for c in checks:
        suite = c.get("suite", "")
        totals[suite] = totals.get(suite, 0) + int(c.get("checked", 0))
    return totals


def calculate_detection_rate(table: pd.DataFrame) -> float:
    """Calculate the share of applicable mutants that were detected.

    Skipped mutants do not count.

    Args:
        table: Detection table with 'skipped' and 'detected' columns.

    Returns:
        Detection rate between 0.0 and 1.0 (1.0 when nothing ran).
    """
    if table.empty:
        return 1.0
    ran = table[~table["skipped"].astype(bool)]
    if ran.empty:
        return 1.0
    return float(ran["detected"].astype(bool).mean())


def calculate_detection_by_suite(table: pd.DataFrame) -> Dict[str, float]:
    """Detection rate per target suite, skipped mutants excluded."""
    ran = table[~table["skipped"].astype(bool)]
    if ran.empty:
        return {}
    rates = ran.groupby("suite")["detected"].apply(lambda s: float(s.astype(bool).mean()))
    return {suite: rate for suite, rate in rates.sort_index().items()}


def calculate_skip_rate(table: pd.DataFrame) -> float:
    """Fraction of mutants skipped because the system was too small."""
    if table.empty:
        return 0.0
    return float(table["skipped"].astype(bool).mean())


def calculate_latency(timings: List[float]) -> Dict[str, float]:
    """Calculate timing statistics.

    Args:
        timings: Elapsed seconds per run.

    Returns:
        Dictionary with mean, median, min and max.
    """
    if not timings:
        return {"mean": 0.0, "median": 0.0, "min": 0.0, "max": 0.0}
    return {
        "mean": statistics.mean(timings),
        "median": statistics.median(timings),
        "min": min(timings),
        "max": max(timings),
    }


def calculate_max_deviation(exact_law: Dict[str, str], empirical: Dict[str, float]) -> float:
    """Largest absolute gap between exact and empirical outcome frequencies.

    Args:
        exact_law: Outcome -> exact probability as a fraction string.
        empirical: Outcome -> observed frequency.

    Returns:
        Maximum deviation over the outcomes of the exact law.
    """
    gaps = [abs(float(Fraction(p)) - empirical.get(outcome, 0.0)) for outcome, p in exact_law.items()]
    return max(gaps) if gaps else 0.0


def calculate_all_metrics(reports: List[Dict[str, Any]],
                          detection: Optional[pd.DataFrame] = None,
                          sample_summary: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Calculate all metrics at once.

    Args:
        reports: JSON reports written by ``convlim verify --json``.
        detection: Detection table from ``convlim mutate --csv``.
        sample_summary: Summary written next to a trajectory CSV.

    Returns:
        Flat dictionary of metrics.
    """
    checks = [c for r in reports for c in r.get("checks", [])]
    latency = calculate_latency([float(r.get("elapsed", 0.0)) for r in reports])
    metrics: Dict[str, Any] = {
        "reports": len(reports),
        "checks": len(checks),
        "pass_rate": calculate_pass_rate(checks),
        "checked_cases": sum(calculate_checked_totals(checks).values()),
        "latency_mean": latency["mean"],
        "latency_max": latency["max"],
    }
    if detection is not None:
        metrics["mutants"] = len(detection)
        metrics["detection_rate"] = calculate_detection_rate(detection)
        metrics["skip_rate"] = calculate_skip_rate(detection)
    if sample_summary is not None:
        metrics["sample_n"] = sample_summary.get("n", 0)
        metrics["sample_max_deviation"] = calculate_max_deviation(
            sample_summary.get("exact_law", {}), sample_summary.get("empirical", {})
        )
    return metrics
