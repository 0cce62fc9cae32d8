import json

import pytest

from archselect.domain import DEFAULT_CATALOG, DEFAULT_CONDITION, Requirement
from archselect.errors import ChunkTooLarge, IdMismatch, UnknownQaLabel, UnparseableResponse
from archselect.extraction import build_prompt1, extract_asrs, parse_prompt1_response
from archselect.gateway import Gateway, MockBackend

REQS = [Requirement(f"R{i}", f"The system shall do thing {i}.") for i in range(1, 21)]


def test_prompt1_contents():
    p = build_prompt1(REQS)
    assert "architecturally significant" in p
    assert "It explicitly states a key decision" in p
    for qa in DEFAULT_CATALOG:
        assert qa.description in p
    for i in range(1, 21):
        assert f"{i}. [R{i}] The system shall do thing {i}." in p


def test_prompt1_chunk_limits():
    with pytest.raises(ChunkTooLarge):
        build_prompt1(REQS + [Requirement("R21", "x")])
    with pytest.raises(ValueError):
        build_prompt1([])


def _reply(*items):
    return json.dumps(list(items))


def test_parse_examples():
    recs = parse_prompt1_response(
        _reply(
            {"id": "R1", "is_asr": True, "qas": ["Performance"], "condition": "under peak load"},
            {"id": "R2", "is_asr": True, "qas": ["Security", "Usability"], "condition": ""},
            {"id": "R3", "is_asr": False, "qas": [], "condition": ""},
        ),
        ["R1", "R2", "R3", "R4"],
    )
    assert [(r.requirement_id, r.is_asr, r.qas, r.condition) for r in recs] == [
        ("R1", True, ("PE",), "under peak load"),
        ("R2", True, ("IC", "SE"), DEFAULT_CONDITION),
        ("R3", False, (), ""),
        ("R4", False, (), ""),
    ]


def test_parse_tolerates_fences_and_alternate_keys():
    reply = "```json\n" + json.dumps({"results": [{"requirement_id": "R1", "asr": "yes", "quality_attributes": "PE; RE", "condition": "N/A"}]}) + "\n```"
    (rec,) = parse_prompt1_response(reply, ["R1"])
    assert rec.qas == ("PE", "RE") and rec.condition == DEFAULT_CONDITION


def test_parse_unknown_labels():
    reply = _reply({"id": "R1", "is_asr": True, "qas": ["Velocity"], "condition": "x"})
    (rec,) = parse_prompt1_response(reply, ["R1"])
    assert not rec.is_asr  # demoted: nothing resolvable
    with pytest.raises(UnknownQaLabel):
        parse_prompt1_response(reply, ["R1"], strict=True)


def test_parse_errors():
    with pytest.raises(UnparseableResponse):
        parse_prompt1_response("not json", ["R1"])
    with pytest.raises(IdMismatch):
        parse_prompt1_response(_reply({"id": "R9", "is_asr": False}), ["R1"])


def test_ums_extraction(ums_requirements, ums_gateway):
    batch = extract_asrs(ums_requirements, ums_gateway)
    assert [r.requirement_id for r in batch.asrs] == ["R1", "R2", "R3", "R6", "R7", "R9"]
    by = {r.requirement_id: r for r in batch.records}
    assert by["R3"].qas == ("IC", "RE")
    assert by["R1"].condition == "under normal operating conditions"
    assert ums_gateway.stats.completion_calls == 1
    assert type(batch).from_dict(batch.to_dict()) == batch


def test_chunking_call_count(mock_gateway):
    reqs = [Requirement(f"R{i}", f"text {i}") for i in range(45)]
    batch = extract_asrs(reqs, mock_gateway, chunk_size=20)
    assert mock_gateway.stats.completion_calls == 3
    assert [r.requirement_id for r in batch.records] == [r.id for r in reqs]


def test_malformed_json_retried_then_fails():
    gw = Gateway(MockBackend({}), max_retries=2)
    gw.backend.complete = lambda *a: "oops"
    with pytest.raises(UnparseableResponse):
        extract_asrs(REQS[:2], gw)
    assert gw.stats.completion_calls == 3


def test_strict_mode_through_extract():
    fixture = {"prompt1": {"R1": {"is_asr": True, "qas": ["Velocity"], "condition": "x"}}}
    with pytest.raises(UnknownQaLabel):
        extract_asrs(REQS[:1], Gateway(MockBackend(fixture)), strict=True)
