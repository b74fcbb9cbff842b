"""Export, sample and tower commands.

Every command takes a SuiteContext, so the derived objects (projective
CPPS, flow system, product system) are built once and shared with the
verification suites.
"""
from __future__ import annotations

import json
import logging
import math
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .description import build_system, build_tower, load_description
from .finprob import FinProbSpace, format_rational
from .l2 import koopman, theta_matrices
from .order_partition import TimeSet
from .protocols import Report, SystemDescription
from .suites import SuiteContext, cmd_verify

logger = logging.getLogger(__name__)

# ---------- Configuration Constants ----------
DEFAULT_SEED = 0
RNG_ALGORITHM = "numpy.PCG64"
EXPORT_KINDS = ("koopman", "theta", "cpps-spaces", "flow-laws")


def context_from_description(desc: SystemDescription) -> SuiteContext:
    """SuiteContext of a parsed description, with its tower when present."""
    tower = build_tower(desc) if desc.tower is not None else None
    return SuiteContext(build_system(desc), description=desc, tower_source=tower)


def load_context(path: str, schema: Optional[Dict[str, Any]] = None) -> SuiteContext:
    """Parse a description file and wrap it in a SuiteContext.

    Raises:
        DescriptionError: For unreadable or invalid descriptions.
    """
    return context_from_description(load_description(path, schema))


def parse_positions(times: TimeSet, text: str, count: int) -> Tuple[int, ...]:
    """Positions of ``count`` comma-separated, strictly increasing time labels.

    Raises:
        ValueError: On a wrong count, an unknown label or a non-increasing tuple.
    """
    what = {2: "window", 3: "triple"}.get(count, "tuple")
    parts = [p.strip() for p in text.split(",")] if text else []
    if len(parts) != count:
        raise ValueError(f"invalid {what} {text!r}: expected {count} comma-separated time labels")
    positions = tuple(times.index(p) for p in parts)
    if any(a >= b for a, b in zip(positions, positions[1:])):
        raise ValueError(f"invalid {what} {text!r}: labels must be strictly increasing")
    return positions


def _rational(value: Any) -> str:
    if isinstance(value, Fraction):
        return format_rational(value)
    return format_rational(Fraction(int(value)))


def matrix_to_json(matrix: np.ndarray) -> List[List[str]]:
    """Row-major list of rational strings."""
    return [[_rational(v) for v in row] for row in matrix]


def _law_table(space: FinProbSpace, weights: Sequence[Fraction]) -> Dict[str, str]:
    return {str(o): format_rational(w) for o, w in zip(space.outcomes, weights)}


# ---------- Export ----------

def cmd_export(ctx: SuiteContext, what: str, triple: Optional[str] = None,
               window: Optional[str] = None) -> Dict[str, Any]:
    """Export matrices or laws as a JSON-ready document.

    Args:
        ctx: Suite context of the system.
        what: One of EXPORT_KINDS.
        triple: ``r,s,t`` time labels for ``koopman``; the first three times
            when None.
        window: ``s,t`` time labels for ``theta``; the whole time set when None.

    Returns:
        Document with ``what``, the selected indices and the payload
        (``matrix`` for operators, ``windows`` for space and law tables).

    Raises:
        ValueError: For an unknown kind or an invalid triple / window.
    """
    sys = ctx.system
    times = sys.times
    if what == "koopman":
        if triple is None:
            if len(times) < 3:
                raise ValueError("koopman export needs a time set with at least three points")
            r, s, t = 0, 1, 2
        else:
            r, s, t = parse_positions(times, triple, 3)
        op = koopman(sys.mult(r, s, t))
        logger.info("exporting Koopman isometry of triple %s", times.describe(r, s, t))
        return {
            "what": "koopman",
            "triple": [times.label(p) for p in (r, s, t)],
            "shape": list(op.matrix.shape),
            "rows": [str(o) for o in op.target.outcomes],
            "columns": [str(o) for o in op.source.outcomes],
            "matrix": matrix_to_json(op.matrix),
        }
    if what == "theta":
        s, t = (0, len(times) - 1) if window is None else parse_positions(times, window, 2)
        matrix = theta_matrices(ctx.product_system, ctx.cpps)[(s, t)]
        return {
            "what": "theta",
            "window": [times.label(s), times.label(t)],
            "shape": list(matrix.shape),
            "matrix": matrix_to_json(matrix),
        }
    if what == "cpps-spaces":
        cpps = ctx.cpps
        return {
            "what": "cpps-spaces",
            "windows": [
                {
                    "from": times.label(s),
                    "to": times.label(t),
                    "cells": [[times.label(a), times.label(b)] for a, b in times.grid(s, t).cells],
                    "law": _law_table(cpps.space(s, t), cpps.space(s, t).weights),
                }
                for s, t in times.windows()
            ],
        }
    if what == "flow-laws":
        flow = ctx.flow
        return {
            "what": "flow-laws",
            "windows": [
                {
                    "from": times.label(s),
                    "to": times.label(t),
                    "law": _law_table(sys.space(s, t), flow.X[(s, t)].pushforward()),
                }
                for s, t in times.windows()
            ],
        }
    raise ValueError(f"unknown export {what!r}; choose from: {', '.join(EXPORT_KINDS)}")


# ---------- Sampling ----------

def integer_weights(space: FinProbSpace) -> Tuple[int, np.ndarray]:
    """Common denominator D and the integer counts weight * D.

    Raises:
        ValueError: If D does not fit a 64-bit integer.
    """
    denominator = math.lcm(*(w.denominator for w in space.weights))
    if denominator >= 2 ** 63:
        raise ValueError(f"common denominator {denominator} is too large for exact sampling")
    counts = np.array([int(w * denominator) for w in space.weights], dtype=np.int64)
    return denominator, counts


def draw_indices(space: FinProbSpace, n: int, seed: int) -> np.ndarray:
    """n exact draws from ``space``: uniform integers below D, located in the count CDF."""
    denominator, counts = integer_weights(space)
    rng = np.random.default_rng(seed)
    uniforms = rng.integers(0, denominator, size=n)
    return np.searchsorted(np.cumsum(counts), uniforms, side="right")


def _composition_ok(ctx: SuiteContext) -> np.ndarray:
    flow, sys = ctx.flow, ctx.system
    ok = np.ones(flow.base.size, dtype=bool)
    for r, s, t in sys.times.triples():
        xrs, xst, xrt = flow.X[(r, s)].table, flow.X[(s, t)].table, flow.X[(r, t)].table
        for x in range(flow.base.size):
            if sys.multiply(r, s, t, xrs[x], xst[x]) != xrt[x]:
                ok[x] = False
    return ok


def cmd_sample(ctx: SuiteContext, start: str, end: str, n: int, seed: int = DEFAULT_SEED,
               out: Optional[str] = None) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Draw full-grid threads of the flow system.

    Each row holds one thread: the outcome of every adjacent grid cell and
    every increment X(u, v). The summary compares the empirical law of
    X(start, end) with its exact law.

    Args:
        ctx: Suite context of the system.
        start: Time label s.
        end: Time label t, after s.
        n: Number of draws, at least 1.
        seed: Seed of the RNG_ALGORITHM generator.
        out: CSV path; the summary goes to ``<out>.summary.json``. Nothing is
            written when None.

    Returns:
        (trajectory frame, summary dict).

    Raises:
        ValueError: For n < 1 or an invalid window.
    """
    if n < 1:
        raise ValueError(f"sample size must be at least 1, got {n}")
    sys = ctx.system
    times = sys.times
    s, t = parse_positions(times, f"{start},{end}", 2)
    flow = ctx.flow
    base = flow.base
    drawn = draw_indices(base, n, seed)

    cells = times.grid().cells
    outcomes = list(base.outcomes) if len(cells) > 1 else [(o,) for o in base.outcomes]
    frame = pd.DataFrame({"thread_index": np.arange(n)})
    for k, (a, b) in enumerate(cells):
        labels = np.array([str(o[k]) for o in outcomes], dtype=object)
        frame[f"cell[{times.label(a)},{times.label(b)}]"] = labels[drawn]
    for u, v in times.windows():
        labels = np.array([str(o) for o in sys.space(u, v).outcomes], dtype=object)
        frame[f"X[{times.label(u)},{times.label(v)}]"] = labels[np.array(flow.X[(u, v)].table)[drawn]]

    column = f"X[{times.label(s)},{times.label(t)}]"
    target = sys.space(s, t)
    exact = flow.X[(s, t)].pushforward()
    freq = frame[column].value_counts(normalize=True)
    summary = {
        "algorithm": RNG_ALGORITHM,
        "seed": seed,
        "n": n,
        "window": [times.label(s), times.label(t)],
        "exact_law": _law_table(target, exact),
        "empirical": {str(o): float(freq.get(str(o), 0.0)) for o in target.outcomes},
        "max_deviation": max(abs(float(freq.get(str(o), 0.0)) - float(w)) for o, w in zip(target.outcomes, exact)),
        "composition_checked": int(_composition_ok(ctx)[drawn].sum()),
    }
    logger.info("sampled %d threads with seed %d", n, seed)

    if out:
        frame.to_csv(out, index=False)
        with open(f"{out}.summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
    return frame, summary


# ---------- Tower ----------

def cmd_tower(ctx: SuiteContext, source: str = "") -> Report:
    """Run the cylinder-tower diagnostics alone."""
    report = cmd_verify(ctx, suite="tower", workers=1, source=source)
    report.meta["levels"] = [list(level.labels) for level in ctx.tower.levels]
    report.meta["events"] = [str(e) for e in ctx.tower.events]
    return report
