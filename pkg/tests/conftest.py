"""Pytest configuration and shared fixtures for convlim tests.

Provides the reference systems (Fixture A, Fixture B and friends),
description documents, a catalogue of small semigroups with a hypothesis
strategy over their generated systems, schema access, temporary directories
and a JSON
comparator used across test modules.
"""
import json
import shutil
import sys
import tempfile
from pathlib import Path
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pytest
from hypothesis import strategies as st
from jsonschema import Draft7Validator

# Get project root directory
PROJECT_ROOT = Path(__file__).parent.parent.resolve()
sys.path.insert(0, str(PROJECT_ROOT))

SCHEMA_PATH = PROJECT_ROOT / "schemas" / "system_description.schema.json"
FIXTURES_DIR = PROJECT_ROOT / "fixtures"

from convlim.commands import load_context  # noqa: E402
from convlim.convsys import FiniteSemigroup, cyclic_group, from_idempotent, from_semigroup_generator  # noqa: E402
from convlim.finprob import parse_rational  # noqa: E402
from convlim.order_partition import TimeSet  # noqa: E402

HALF = parse_rational("1/2")


# ---------- Small semigroups ----------

def _table(n: int, op) -> FiniteSemigroup:
    return FiniteSemigroup(tuple(str(i) for i in range(n)), tuple(tuple(op(a, b) for b in range(n)) for a in range(n)))


def left_zero_with_identity() -> FiniteSemigroup:
    """{e, a, b}: e is a two-sided identity, xy = x on {a, b}."""
    return FiniteSemigroup(("e", "a", "b"), ((0, 1, 2), (1, 1, 1), (2, 2, 2)))


SEMIGROUPS: Dict[str, FiniteSemigroup] = {
    "z1": cyclic_group(1),
    "z2": cyclic_group(2),
    "z3": cyclic_group(3),
    "z4": cyclic_group(4),
    "left_zero2": _table(2, lambda a, b: a),
    "right_zero3": _table(3, lambda a, b: b),
    "left_zero_identity": left_zero_with_identity(),
    "rectangular_band": _table(4, lambda a, b: 2 * (a // 2) + b % 2),
    "z2_x_right_zero": _table(4, lambda a, b: 2 * ((a // 2 + b // 2) % 2) + b % 2),
    "min_semilattice": _table(3, min),
    "null3": _table(3, lambda a, b: 0),
}

NON_COMMUTATIVE = ("left_zero2", "right_zero3", "left_zero_identity", "rectangular_band", "z2_x_right_zero")


def relabel(sg: FiniteSemigroup, perm: Sequence[int]) -> FiniteSemigroup:
    """Isomorphic copy with element i moved to index perm[i]."""
    n = sg.size
    inverse = [0] * n
    for i, p in enumerate(perm):
        inverse[p] = i
    elements = tuple(sg.elements[inverse[j]] for j in range(n))
    table = tuple(tuple(perm[sg.op(inverse[a], inverse[b])] for b in range(n)) for a in range(n))
    return FiniteSemigroup(elements, table)


@st.composite
def generated_systems(draw, max_times: int = 4, min_count: int = 0):
    """Generator-measure systems over a relabelled catalogue semigroup."""
    name = draw(st.sampled_from(sorted(SEMIGROUPS)))
    sg = SEMIGROUPS[name]
    sg = relabel(sg, draw(st.permutations(range(sg.size))))
    counts = draw(st.lists(st.integers(min_value=min_count, max_value=3), min_size=sg.size, max_size=sg.size)
                  .filter(lambda c: sum(c) > 0))
    n = draw(st.integers(min_value=2, max_value=max_times))
    nu = tuple(Fraction(c, sum(counts)) for c in counts)
    return from_semigroup_generator(sg, nu, TimeSet.range(n), name=name)


def pytest_configure(config):
    config.addinivalue_line("markers", "unit: fast tests of one module")
    config.addinivalue_line("markers", "integration: CLI and end-to-end tests")


def fixture_path(name: str) -> str:
    """Path of a description under fixtures/."""
    return str(FIXTURES_DIR / f"{name}.json")


def load_fixture_doc(name: str) -> Dict[str, Any]:
    with open(fixture_path(name), "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test outputs.

    Returns:
        Path to temporary directory (automatically cleaned up after test).
    """
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def schema_path():
    return str(SCHEMA_PATH)


@pytest.fixture
def schema():
    """Load and return the description schema."""
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def schema_validator(schema):
    return Draft7Validator(schema)


@pytest.fixture
def system_a():
    """Fixture A: Z/2 with the uniform idempotent over times 0..3."""
    return from_idempotent(cyclic_group(2), (HALF, HALF), TimeSet.range(4), name="fixture_a")


@pytest.fixture
def system_b():
    """Fixture B: Z/3 generated by {0: 1/2, 1: 1/2} over times 0..2."""
    return from_semigroup_generator(cyclic_group(3), (HALF, HALF, 0), TimeSet.range(3), name="fixture_b")


@pytest.fixture
def system_z5():
    """Z/5 with the uniform idempotent over three times."""
    return from_idempotent(cyclic_group(5), (parse_rational("1/5"),) * 5, TimeSet.range(3), name="z5")


@pytest.fixture
def doc_a():
    return load_fixture_doc("fixture_a")


@pytest.fixture
def doc_b():
    return load_fixture_doc("fixture_b")


@pytest.fixture
def ctx_a():
    return load_context(fixture_path("fixture_a"))


@pytest.fixture
def ctx_b():
    return load_context(fixture_path("fixture_b"))


def compare_json_semantic(actual: Dict[str, Any], expected: Dict[str, Any],
                          ignore_keys: Optional[List[str]] = None) -> Tuple[bool, List[str]]:
    """Compare two JSON objects key by key, ignoring dict order.

    Args:
        actual: The actual JSON object to compare.
        expected: The expected JSON object to compare against.
        ignore_keys: Optional list of keys to ignore during comparison.

    Returns:
        Tuple containing:
            - is_equal: True if objects match.
            - differences: List of difference descriptions if not equal.
    """
    ignore_keys = ignore_keys or []
    differences: List[str] = []

    def _compare(a, b, path=""):
        if type(a) != type(b):
            differences.append(f"{path}: Type mismatch - {type(a).__name__} vs {type(b).__name__}")
            return False
        if isinstance(a, dict):
            for key in set(a) | set(b):
                if key in ignore_keys:
                    continue
                new_path = f"{path}.{key}" if path else key
                if key not in a or key not in b:
                    differences.append(f"{new_path}: Missing in {'actual' if key not in a else 'expected'}")
                    return False
                if not _compare(a[key], b[key], new_path):
                    return False
            return True
        if isinstance(a, list):
            if len(a) != len(b):
                differences.append(f"{path}: List length mismatch - {len(a)} vs {len(b)}")
                return False
            return all(_compare(x, y, f"{path}[{i}]") for i, (x, y) in enumerate(zip(a, b)))
        if a != b:
            differences.append(f"{path}: Value mismatch - {a} vs {b}")
            return False
        return True

    return _compare(actual, expected), differences


@pytest.fixture
def json_comparator():
    """Return the JSON comparison function."""
    return compare_json_semantic
