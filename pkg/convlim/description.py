"""System description ingestion and serialization.

A description is one JSON document (``format: 1``) validated against
``schemas/system_description.schema.json`` and then checked semantically
while the convolution system is assembled. Every failure raises
DescriptionError with a dotted path such as ``measures.per_interval[1]``.

Explicit descriptions whose multiplications break associativity still
parse; the ``axioms`` suite reports them with a witness.
"""
from __future__ import annotations

import json
import logging
import os
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from jsonschema import Draft7Validator

from .convsys import (
    ConvolutionSystem,
    FiniteSemigroup,
    from_idempotent,
    from_semigroup_generator,
    restrict,
)
from .errors import DescriptionError, MeasureError, PartitionError, SystemConstructionError
from .finprob import FinProbSpace, ProbMorphism, parse_rational, product
from .order_partition import TimeSet
from .projective import CylinderEvent, CylinderTower
from .protocols import SystemDescription

logger = logging.getLogger(__name__)

# ---------- Configuration Constants ----------
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCHEMA_PATH = os.path.join(PROJECT_ROOT, "schemas", "system_description.schema.json")
FORMAT_VERSION = 1

_NUMERIC_KEYS = {"format", "positions"}


# ---------- Validation ----------

def load_schema(path: str = SCHEMA_PATH) -> Dict[str, Any]:
    """Load the description JSON schema.

    Raises:
        FileNotFoundError: If the schema file does not exist.
        json.JSONDecodeError: If the file contains invalid JSON.
    """
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _dotted(path: Sequence[Any]) -> str:
    out = ""
    for part in path:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out


def validate_description(doc: Dict[str, Any], schema: Dict[str, Any]) -> List[Tuple[str, str]]:
    """Schema errors as (dotted path, message), sorted by path."""
    v = Draft7Validator(schema)
    errors = sorted(v.iter_errors(doc), key=lambda e: [str(p) for p in e.path])
    return [(_dotted(e.path), e.message) for e in errors]


def _stringify(value: Any, key: Optional[str] = None) -> Any:
    if key in _NUMERIC_KEYS:
        return value
    if isinstance(value, dict):
        return {k: _stringify(v, k) for k, v in value.items()}
    if isinstance(value, list):
        return [_stringify(v) for v in value]
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return value


def parse_description(doc: Dict[str, Any], schema: Optional[Dict[str, Any]] = None) -> SystemDescription:
    """Validate a description document and check that it assembles.

    Args:
        doc: Parsed JSON document.
        schema: Description schema; loaded from SCHEMA_PATH when None.

    Returns:
        The normalized description (labels and rationals as strings).

    Raises:
        DescriptionError: Located schema or semantic failure.
    """
    errors = validate_description(doc, schema or load_schema())
    if errors:
        path, message = errors[0]
        raise DescriptionError(message, path)
    desc = SystemDescription.model_validate(_stringify(doc))
    build_system(desc)
    if desc.tower is not None:
        build_tower(desc)
    return desc


def load_description(path: str, schema: Optional[Dict[str, Any]] = None) -> SystemDescription:
    """Read and parse a description file.

    Raises:
        DescriptionError: For unreadable files, invalid JSON or invalid content.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise DescriptionError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DescriptionError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_description(doc, schema)


def serialize(desc: SystemDescription) -> Dict[str, Any]:
    """JSON-ready document; parse_description(serialize(d)) == d."""
    return desc.model_dump(by_alias=True, exclude_none=True)


# ---------- Assembly ----------

def _times(desc: SystemDescription) -> TimeSet:
    try:
        return TimeSet(tuple(desc.times))
    except PartitionError as exc:
        raise DescriptionError(str(exc), "times") from None


def _semigroup(desc: SystemDescription) -> FiniteSemigroup:
    block = desc.semigroup
    try:
        sg = FiniteSemigroup.from_labels(block.elements, block.table)
    except SystemConstructionError as exc:
        raise DescriptionError(str(exc), "semigroup.table") from None
    violation = sg.associativity_violation()
    if violation is not None:
        a, b, c = (sg.elements[i] for i in violation)
        raise DescriptionError(f"operation is not associative on ({a}, {b}, {c})", "semigroup.table")
    return sg


def _law(sg: FiniteSemigroup, law: Dict[str, str], path: str) -> Tuple:
    try:
        weights = sg.measure(law)
        FinProbSpace(sg.elements, weights)
    except (MeasureError, SystemConstructionError) as exc:
        raise DescriptionError(str(exc), path) from None
    return weights


def _semigroup_rule(desc: SystemDescription) -> Callable[[TimeSet], ConvolutionSystem]:
    sg = _semigroup(desc)
    measures = desc.measures
    given = [k for k in ("idempotent", "generator") if getattr(measures, k) is not None]
    if len(given) != 1 or measures.per_interval is not None:
        raise DescriptionError("semigroup mode needs exactly one of 'idempotent' or 'generator'", "measures")
    kind = given[0]
    weights = _law(sg, getattr(measures, kind), f"measures.{kind}")
    if kind == "idempotent":
        return lambda times: from_idempotent(sg, weights, times, name=desc.name)
    return lambda times: from_semigroup_generator(sg, weights, times, positions=desc.positions, name=desc.name)


def _window(times: TimeSet, start: str, end: str, path: str) -> Tuple[int, int]:
    try:
        s, t = times.index(start), times.index(end)
    except PartitionError as exc:
        raise DescriptionError(str(exc), path) from None
    if s >= t:
        raise DescriptionError(f"interval ({start},{end}) is not increasing", path)
    return s, t


def _explicit_system(desc: SystemDescription, times: TimeSet) -> ConvolutionSystem:
    outcomes: Dict[Tuple[int, int], List[str]] = {}
    for i, entry in enumerate(desc.spaces or []):
        path = f"spaces[{i}]"
        w = _window(times, entry["from"], entry["to"], path)
        if w in outcomes:
            raise DescriptionError(f"interval ({entry['from']},{entry['to']}) is listed twice", path)
        outcomes[w] = list(entry["outcomes"])
    missing = [w for w in times.windows() if w not in outcomes]
    if missing:
        raise DescriptionError(f"no space for interval {times.describe(*missing[0])}", "spaces")

    if desc.measures.per_interval is None or desc.measures.idempotent or desc.measures.generator:
        raise DescriptionError("explicit mode needs 'per_interval' measures only", "measures")
    spaces: Dict[Tuple[int, int], FinProbSpace] = {}
    for i, entry in enumerate(desc.measures.per_interval):
        path = f"measures.per_interval[{i}]"
        w = _window(times, entry["from"], entry["to"], path)
        if w in spaces:
            raise DescriptionError(f"interval {times.describe(*w)} is listed twice", path)
        try:
            spaces[w] = FinProbSpace(tuple(outcomes[w]), tuple(parse_rational(x) for x in entry["weights"]))
        except MeasureError as exc:
            raise DescriptionError(f"interval {times.describe(*w)}: {exc}", path) from None
    missing = [w for w in times.windows() if w not in spaces]
    if missing:
        raise DescriptionError(f"no measure for interval {times.describe(*missing[0])}", "measures.per_interval")

    mults = {}
    for i, entry in enumerate(desc.mult or []):
        path = f"mult[{i}]"
        try:
            r, s, t = (times.index(entry[k]) for k in ("r", "s", "t"))
        except PartitionError as exc:
            raise DescriptionError(str(exc), path) from None
        if not r < s < t:
            raise DescriptionError(f"triple {times.describe(r, s, t)} is not increasing", path)
        if (r, s, t) in mults:
            raise DescriptionError(f"triple {times.describe(r, s, t)} is listed twice", path)
        left, right, target = spaces[(r, s)], spaces[(s, t)], spaces[(r, t)]
        table: List[Optional[int]] = [None] * (left.size * right.size)
        for j, row in enumerate(entry["table"]):
            row_path = f"{path}.table[{j}]"
            try:
                a, b, c = left.index(row[0]), right.index(row[1]), target.index(row[2])
            except MeasureError as exc:
                raise DescriptionError(str(exc), row_path) from None
            k = a * right.size + b
            if table[k] is not None:
                raise DescriptionError(f"pair ({row[0]}, {row[1]}) is listed twice", row_path)
            table[k] = c
        if None in table:
            k = table.index(None)
            a, b = divmod(k, right.size)
            raise DescriptionError(f"no product for pair ({left.outcomes[a]}, {right.outcomes[b]})", f"{path}.table")
        mults[(r, s, t)] = ProbMorphism(product([left, right]), target, tuple(table))
    missing = [t for t in times.triples() if t not in mults]
    if missing:
        raise DescriptionError(f"no multiplication for triple {times.describe(*missing[0])}", "mult")
    return ConvolutionSystem(times, spaces, mults, name=desc.name)


def system_rule(desc: SystemDescription) -> Callable[[TimeSet], ConvolutionSystem]:
    """Function building the described system over any (sub) time set."""
    if desc.mode == "semigroup":
        return _semigroup_rule(desc)
    full = _explicit_system(desc, _times(desc))
    return lambda times: full if times == full.times else restrict(full, times)


def build_system(desc: SystemDescription) -> ConvolutionSystem:
    """Assemble the convolution system.

    Raises:
        DescriptionError: Located semantic failure.
    """
    times = _times(desc)
    rule = system_rule(desc)
    try:
        sys = rule(times)
    except (SystemConstructionError, MeasureError, PartitionError) as exc:
        raise DescriptionError(str(exc), "positions" if desc.positions else "measures") from None
    logger.info("assembled system %s over %d times", desc.name or "<unnamed>", len(times))
    return sys


def build_tower(desc: SystemDescription) -> CylinderTower:
    """Cylinder tower of the description; every level is built up front.

    Raises:
        DescriptionError: If the description has no tower or a level fails.
    """
    if desc.tower is None:
        raise DescriptionError("description has no tower block", "tower")
    rule = system_rule(desc)
    levels: List[TimeSet] = []
    systems: Dict[Tuple[str, ...], ConvolutionSystem] = {}
    for i, labels in enumerate(desc.tower.levels):
        path = f"tower.levels[{i}]"
        try:
            level = TimeSet(tuple(labels))
            systems[level.labels] = rule(level)
        except (PartitionError, SystemConstructionError, MeasureError) as exc:
            raise DescriptionError(str(exc), path) from None
        levels.append(level)
    events = [CylinderEvent(e.from_, e.to, frozenset(e.values)) for e in desc.tower.events]
    return CylinderTower(levels, lambda times: systems[times.labels], events)
