"""Unit tests for description parsing, located errors and system assembly."""
import copy
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from convlim.convsys import check_system
from convlim.description import (
    build_system,
    build_tower,
    load_description,
    parse_description,
    serialize,
    validate_description,
)
from convlim.errors import DescriptionError
from tests.conftest import FIXTURES_DIR, fixture_path, load_fixture_doc


@pytest.mark.unit
class TestSchema:
    """Every shipped fixture matches the schema; structural errors are located."""

    @pytest.mark.parametrize("path", sorted(FIXTURES_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_fixtures_are_schema_valid(self, path, schema_validator):
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        assert list(schema_validator.iter_errors(doc)) == []

    def test_missing_required_field(self, doc_a, schema):
        del doc_a["mode"]
        errors = validate_description(doc_a, schema)
        assert ("", "'mode' is a required property") in errors

    def test_decimal_weight_rejected(self, doc_a, schema):
        doc_a["measures"]["idempotent"]["0"] = "0.5"
        with pytest.raises(DescriptionError) as exc_info:
            parse_description(doc_a, schema)
        assert exc_info.value.path == "measures.idempotent.0"

    def test_unknown_field(self, doc_a, schema):
        doc_a["colour"] = "blue"
        with pytest.raises(DescriptionError, match="colour"):
            parse_description(doc_a, schema)

    def test_wrong_format(self, doc_a, schema):
        doc_a["format"] = 2
        with pytest.raises(DescriptionError) as exc_info:
            parse_description(doc_a, schema)
        assert exc_info.value.path == "format"


@pytest.mark.unit
class TestParse:
    """Normalization and the round trip through serialize."""

    def test_fixture_a(self):
        desc = load_description(fixture_path("fixture_a"))
        assert desc.times == ["0", "1", "2", "3"]
        assert desc.mode == "semigroup"
        assert desc.measures.idempotent == {"0": "1/2", "1": "1/2"}
        assert desc.tower.levels[1] == ["0", "1", "3"]
        assert desc.tower.events[0].from_ == "0"

    def test_round_trip(self):
        for name in ("fixture_a", "fixture_b", "explicit_cpps", "z4_uniform"):
            desc = load_description(fixture_path(name))
            assert parse_description(serialize(desc)) == desc

    def test_serialize_normalizes_labels(self, doc_a, json_comparator):
        out = serialize(parse_description(doc_a))
        expected = copy.deepcopy(doc_a)
        expected["times"] = ["0", "1", "2", "3"]
        expected["tower"] = {
            "levels": [["0", "3"], ["0", "1", "3"], ["0", "1", "2", "3"]],
            "events": [{"from": "0", "to": "3", "values": ["0"]}],
        }
        equal, differences = json_comparator(out, expected)
        assert equal, differences

    def test_unreadable_file(self, temp_dir):
        with pytest.raises(DescriptionError, match="cannot read"):
            load_description(os.path.join(temp_dir, "missing.json"))

    def test_invalid_json(self, temp_dir):
        path = os.path.join(temp_dir, "broken.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write("{\"format\": 1,")
        with pytest.raises(DescriptionError, match="invalid JSON at line 1"):
            load_description(path)


@pytest.mark.unit
class TestSemanticErrors:
    """Located failures after the schema passes."""

    def test_bad_weights(self):
        with pytest.raises(DescriptionError) as exc_info:
            load_description(fixture_path("bad_weights"))
        assert exc_info.value.path == "measures.per_interval[1]"
        assert "9/10" in str(exc_info.value)

    def test_non_associative_table(self):
        with pytest.raises(DescriptionError) as exc_info:
            load_description(fixture_path("bad_nonassociative"))
        assert exc_info.value.path == "semigroup.table"
        assert "not associative" in str(exc_info.value)

    def test_non_idempotent_measure(self, doc_a):
        doc_a["measures"]["idempotent"] = {"0": "1/3", "1": "2/3"}
        with pytest.raises(DescriptionError, match="not idempotent") as exc_info:
            parse_description(doc_a)
        assert exc_info.value.path == "measures"

    def test_two_measure_kinds(self, doc_a):
        doc_a["measures"]["generator"] = {"1": "1"}
        with pytest.raises(DescriptionError, match="exactly one") as exc_info:
            parse_description(doc_a)
        assert exc_info.value.path == "measures"

    def test_unknown_element_in_law(self, doc_a):
        doc_a["measures"]["idempotent"] = {"0": "1/2", "7": "1/2"}
        with pytest.raises(DescriptionError) as exc_info:
            parse_description(doc_a)
        assert exc_info.value.path == "measures.idempotent"

    def test_duplicate_times(self, doc_a):
        doc_a["times"] = [0, 1, 1]
        with pytest.raises(DescriptionError, match="distinct") as exc_info:
            parse_description(doc_a)
        assert exc_info.value.path == "times"

    def test_generator_needs_positions_for_named_times(self):
        doc = load_fixture_doc("fixture_b")
        doc["times"] = ["a", "b", "c"]
        doc.pop("tower")
        with pytest.raises(DescriptionError, match="not integers"):
            parse_description(doc)
        doc["positions"] = {"a": 0, "b": 1, "c": 2}
        desc = parse_description(doc)
        assert desc.positions == {"a": 0, "b": 1, "c": 2}

    def test_explicit_missing_product(self):
        doc = load_fixture_doc("explicit_xor")
        doc["mult"][0]["table"].pop()
        with pytest.raises(DescriptionError, match="no product for pair") as exc_info:
            parse_description(doc)
        assert exc_info.value.path == "mult[0].table"

    def test_explicit_missing_triple(self):
        doc = load_fixture_doc("explicit_xor")
        doc["mult"] = []
        with pytest.raises(DescriptionError, match="no multiplication") as exc_info:
            parse_description(doc)
        assert exc_info.value.path == "mult"

    def test_explicit_unknown_outcome(self):
        doc = load_fixture_doc("explicit_xor")
        doc["mult"][0]["table"][0] = ["a", "c", "q"]
        with pytest.raises(DescriptionError) as exc_info:
            parse_description(doc)
        assert exc_info.value.path == "mult[0].table[0]"

    def test_decreasing_interval(self):
        doc = load_fixture_doc("explicit_xor")
        doc["spaces"][0]["from"], doc["spaces"][0]["to"] = "1", "0"
        with pytest.raises(DescriptionError, match="not increasing") as exc_info:
            parse_description(doc)
        assert exc_info.value.path == "spaces[0]"


@pytest.mark.unit
class TestAssembly:
    """Systems and towers built from parsed descriptions."""

    def test_semigroup_system(self):
        sys_ = build_system(load_description(fixture_path("fixture_b")))
        assert sys_.space(0, 2).law() == {"0": Fraction(1, 4), "1": Fraction(1, 2), "2": Fraction(1, 4)}
        assert all(r.passed for r in check_system(sys_))

    def test_explicit_systems(self):
        xor = build_system(load_description(fixture_path("explicit_xor")))
        assert all(r.passed for r in check_system(xor))
        assert not xor.is_cpps
        cpps = build_system(load_description(fixture_path("explicit_cpps")))
        assert cpps.is_cpps

    def test_tower(self):
        tower = build_tower(load_description(fixture_path("fixture_b")))
        assert [list(level.labels) for level in tower.levels] == [["0", "2"], ["0", "1", "2"]]
        assert len(tower.events) == 2
        assert tower.rule(tower.levels[0]).space(0, 1).weights == tower.rule(tower.levels[1]).space(0, 2).weights

    def test_missing_tower(self):
        with pytest.raises(DescriptionError, match="no tower block"):
            build_tower(load_description(fixture_path("z5_uniform")))
