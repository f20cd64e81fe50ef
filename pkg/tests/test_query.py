import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framescout.query import (
    MalformedTriplet,
    MissingSection,
    NoKeyObjects,
    GroundingParseError,
    QuerySpec,
    QueryValidationWarning,
    RelationTriplet,
    RelationType,
    UnknownRelationType,
    WeightedObject,
    parse_grounding_text,
    query_from_json,
    query_to_json,
    to_grounding_text,
    validate_query,
)
from framescout.errors import InputError

WORKED_EXAMPLE = (
    "Key Objects: person, dog, red clothes\n"
    "Cue Objects: grassy_area, leash, fence\n"
    "Rel: (person; attribute; red clothes), (person; spatial; dog)\n"
)


class TestParse:
    def test_worked_example(self):
        q = parse_grounding_text(WORKED_EXAMPLE)
        assert [o.label for o in q.key_objects] == ["person", "dog", "red clothes"]
        assert [o.label for o in q.cue_objects] == ["grassy_area", "leash", "fence"]
        assert [r.rel_type for r in q.relations] == [
            RelationType.ATTRIBUTE,
            RelationType.SPATIAL,
        ]
        assert all(o.weight == 1.0 for o in q.key_objects)
        assert all(o.weight == 0.5 for o in q.cue_objects)

    def test_empty_sections(self):
        q = parse_grounding_text("Key Objects: cup\nCue Objects: \nRel: \n")
        assert [o.label for o in q.key_objects] == ["cup"]
        assert q.cue_objects == ()
        assert q.relations == ()

    def test_unknown_relation_type(self):
        with pytest.raises(UnknownRelationType):
            parse_grounding_text("Key Objects: a\nCue Objects: b\nRel: (a; near; b)")

    def test_missing_key_section(self):
        with pytest.raises(MissingSection):
            parse_grounding_text("Cue Objects: b\nRel: ")

    def test_malformed_triplet_wrong_arity(self):
        with pytest.raises(MalformedTriplet):
            parse_grounding_text("Key Objects: a\nRel: (a; spatial)")

    def test_malformed_triplet_no_parens(self):
        with pytest.raises(MalformedTriplet):
            parse_grounding_text("Key Objects: a\nRel: a; spatial; b")

    def test_sections_any_order_and_noise_lines(self):
        text = (
            "Here is my analysis.\n"
            "Rel: (cat; time; cat)\n"
            "Cue Objects: mat\n"
            "Key Objects: cat\n"
            "Trailing chatter.\n"
        )
        q = parse_grounding_text(text)
        assert [o.label for o in q.key_objects] == ["cat"]
        assert q.relations[0].rel_type is RelationType.TIME

    def test_temporal_alias(self):
        q = parse_grounding_text("Key Objects: dog, cat\nRel: (dog; temporal; cat)")
        assert q.relations[0].rel_type is RelationType.TIME

    def test_repeated_label_only_for_time(self):
        with pytest.raises(MalformedTriplet):
            parse_grounding_text("Key Objects: dog\nRel: (dog; spatial; dog)")

    def test_missing_cue_line_is_empty(self):
        q = parse_grounding_text("Key Objects: cup\nRel: ")
        assert q.cue_objects == ()


class TestValidate:
    def test_auto_appends_unknown_endpoint(self):
        q = QuerySpec(
            objects=(WeightedObject("little girl", 1.0, "key"),),
            relations=(
                RelationTriplet("little girl", RelationType.CAUSAL, "pieces"),
            ),
        )
        with pytest.warns(QueryValidationWarning):
            v = validate_query(q)
        added = [o for o in v.objects if o.label == "pieces"]
        assert added and added[0].kind == "cue" and added[0].weight == 0.5

    def test_identity_when_all_declared(self, person_dog_query):
        v = validate_query(person_dog_query)
        assert {o.label for o in v.objects} == {"person", "dog", "book"}

    def test_no_key_objects(self):
        q = QuerySpec(objects=(WeightedObject("mat", 0.5, "cue"),))
        with pytest.raises(NoKeyObjects):
            validate_query(q)

    def test_duplicates_merge_max_weight(self):
        q = QuerySpec(
            objects=(
                WeightedObject("Person", 0.5, "cue"),
                WeightedObject("person", 1.0, "key"),
            )
        )
        v = validate_query(q)
        assert len(v.objects) == 1
        assert v.objects[0].weight == 1.0
        assert v.objects[0].kind == "key"

    def test_idempotent(self, person_dog_query):
        once = validate_query(person_dog_query)
        assert validate_query(once) == once


class TestRoundTrip:
    def test_grounding_round_trip(self):
        v = validate_query(parse_grounding_text(WORKED_EXAMPLE))
        again = validate_query(parse_grounding_text(to_grounding_text(v)))
        assert again == v

    def test_json_round_trip(self, person_dog_query):
        v = validate_query(person_dog_query)
        assert validate_query(query_from_json(query_to_json(v))) == v

    def test_json_rejects_garbage(self):
        with pytest.raises(InputError):
            query_from_json("not json at all")
        with pytest.raises(InputError):
            query_from_json(json.dumps({"key_objects": [{"weight": 1.0}]}))


label_st = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), whitelist_characters=" "),
    min_size=1,
    max_size=12,
).filter(lambda s: s.strip())


@settings(max_examples=200, deadline=None)
@given(
    keys=st.lists(label_st, min_size=1, max_size=5, unique_by=lambda s: s.strip().casefold()),
    cues=st.lists(label_st, min_size=0, max_size=4, unique_by=lambda s: s.strip().casefold()),
)
def test_key_cue_round_trip_property(keys, cues):
    seen = {k.strip().casefold() for k in keys}
    cues = [c for c in cues if c.strip().casefold() not in seen]
    text = f"Key Objects: {', '.join(keys)}\nCue Objects: {', '.join(cues)}\nRel: \n"
    v = validate_query(parse_grounding_text(text))
    again = validate_query(parse_grounding_text(to_grounding_text(v)))
    assert again == v


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_total_over_arbitrary_text(text):
    try:
        parse_grounding_text(text)
    except GroundingParseError:
        pass
