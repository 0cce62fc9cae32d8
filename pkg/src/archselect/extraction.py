"""Step 1: classify requirements as ASRs and pull out QAs and conditions."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .domain import DEFAULT_CATALOG, DEFAULT_CONDITION, AsrRecord, QaCatalog, Requirement
from .errors import ChunkTooLarge, IdMismatch, UnknownQaLabel, UnparseableResponse
from .gateway import STRUCTURED_JSON, Gateway, MalformedAfterRetries, strip_code_fence

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 20

PROMPT1_TEMPLATE = """I have provided a set of software requirements. I want you to extract the following information:
- Whether it is architecturally significant. A requirement is architecturally significant if it satisfies both of these conditions: 1) It explicitly states a key decision regarding high-level software architecture. 2) It specifies one or more quality attributes regarding software architecture:
{qa_list}
- Find the QAs mentioned in the list above.
- The condition that should be true when the QAs are expected.

Requirements:
{requirements}

Output format: return only a JSON array with one object per requirement, in the order given, of the form
{{"id": "<requirement id>", "is_asr": true or false, "qas": ["<QA name from the list>", ...], "condition": "<condition text, or empty if none>"}}.
Use an empty "qas" list and an empty "condition" for requirements that are not architecturally significant."""

_NO_CONDITION = {"", "n/a", "na", "none", "null", "-", "no condition", "not applicable"}


@dataclass(frozen=True)
class ExtractionBatch:
    requirements: Tuple[Requirement, ...]
    records: Tuple[AsrRecord, ...]
    qa_catalog: Tuple[str, ...]

    def __post_init__(self):
        if [r.id for r in self.requirements] != [r.requirement_id for r in self.records]:
            raise ValueError("extraction records are not aligned with requirements")

    @property
    def asrs(self) -> List[AsrRecord]:
        return [r for r in self.records if r.is_asr]

    def to_dict(self):
        return {
            "requirements": [r.to_dict() for r in self.requirements],
            "records": [r.to_dict() for r in self.records],
            "qa_catalog": list(self.qa_catalog),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(Requirement.from_dict(r) for r in d["requirements"]),
            tuple(AsrRecord.from_dict(r) for r in d["records"]),
            tuple(d["qa_catalog"]),
        )


def format_qa_list(catalog: QaCatalog) -> str:
    return "\n".join(f"  * {qa.name} ({qa.code}): {qa.description}" for qa in catalog)


def build_prompt1(
    requirements_chunk: Sequence[Requirement],
    qa_catalog: QaCatalog = DEFAULT_CATALOG,
    max_chunk: int = DEFAULT_CHUNK_SIZE,
) -> str:
    if not requirements_chunk:
        raise ValueError("cannot build a prompt for an empty chunk")
    if len(requirements_chunk) > max_chunk:
        raise ChunkTooLarge(f"{len(requirements_chunk)} requirements exceed the chunk limit of {max_chunk}")
    reqs = "\n".join(
        f"{i}. [{r.id}] {' '.join(r.text.split())}" for i, r in enumerate(requirements_chunk, 1)
    )
    return PROMPT1_TEMPLATE.format(qa_list=format_qa_list(qa_catalog), requirements=reqs)


def _items(payload):
    if isinstance(payload, list):
        return payload
    if isinstance(payload, dict):
        if "id" in payload:
            return [payload]
        lists = [v for v in payload.values() if isinstance(v, list)]
        if len(lists) == 1:
            return lists[0]
    raise UnparseableResponse(f"expected a JSON array of requirement objects, got {type(payload).__name__}")


def _first(d: dict, *names, default=None):
    for n in names:
        if n in d:
            return d[n]
    return default


def _truthy(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("true", "yes", "y", "1")
    return bool(v)


def parse_prompt1_response(
    response: str,
    expected_ids: Sequence[str],
    qa_catalog: QaCatalog = DEFAULT_CATALOG,
    strict: bool = False,
) -> List[AsrRecord]:
    """Turn a extraction reply into one :class:`AsrRecord` per expected id.

    Missing ids become non-ASR records; unknown QA labels are dropped (or
    raised in strict mode); an ASR left with no QAs is demoted.
    """
    try:
        payload = json.loads(strip_code_fence(response))
    except ValueError as exc:
        raise UnparseableResponse(f"extraction reply is not JSON: {exc}") from exc

    expected = list(expected_ids)
    found = {}
    for item in _items(payload):
        if not isinstance(item, dict):
            raise UnparseableResponse(f"extraction entry is not an object: {item!r}")
        rid = _first(item, "id", "requirement_id", "ID")
        if rid is None:
            raise UnparseableResponse(f"extraction entry without id: {item!r}")
        rid = str(rid).strip()
        if rid not in expected:
            raise IdMismatch(f"reply mentions unexpected requirement id {rid!r}")
        found[rid] = item

    records = []
    for rid in expected:
        item = found.get(rid)
        if item is None:
            log.warning("reply has no entry for %s; treating it as non-ASR", rid)
            records.append(AsrRecord(rid, False))
            continue
        is_asr = _truthy(_first(item, "is_asr", "asr", "architecturally_significant", default=False))
        if not is_asr:
            records.append(AsrRecord(rid, False))
            continue
        labels = _first(item, "qas", "quality_attributes", "qa", default=[]) or []
        if isinstance(labels, str):
            labels = [s for s in labels.replace(";", ",").split(",") if s.strip()]
        qas = []
        for label in labels:
            try:
                code = qa_catalog.resolve(str(label))
            except UnknownQaLabel:
                if strict:
                    raise
                log.warning("%s: dropping unknown QA label %r", rid, label)
                continue
            if code not in qas:
                qas.append(code)
        if not qas:
            log.warning("%s: marked ASR but no QA resolved; demoting to non-ASR", rid)
            records.append(AsrRecord(rid, False))
            continue
        qas.sort(key=qa_catalog.index)
        cond = _first(item, "condition", "conditions", default="") or ""
        if isinstance(cond, list):
            cond = "; ".join(str(c) for c in cond)
        cond = " ".join(str(cond).split())
        if cond.lower().strip(".") in _NO_CONDITION:
            cond = DEFAULT_CONDITION
        records.append(AsrRecord(rid, True, tuple(qas), cond))
    return records


def extract_asrs(
    requirements: Sequence[Requirement],
    gateway: Gateway,
    qa_catalog: QaCatalog = DEFAULT_CATALOG,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    strict: bool = False,
) -> ExtractionBatch:
    if not requirements:
        raise ValueError("no requirements to extract from")
    chunks = [list(requirements[i:i + chunk_size]) for i in range(0, len(requirements), chunk_size)]
    reqs = [
        gateway.request(
            build_prompt1(chunk, qa_catalog, chunk_size),
            STRUCTURED_JSON,
            task="prompt1",
            ids=[r.id for r in chunk],
        )
        for chunk in chunks
    ]
    try:
        replies = gateway.complete_many(reqs)
    except MalformedAfterRetries as exc:
        raise UnparseableResponse(f"extraction prompt: {exc}") from exc
    records: List[AsrRecord] = []
    for n, (chunk, reply) in enumerate(zip(chunks, replies), 1):
        try:
            records.extend(parse_prompt1_response(reply, [r.id for r in chunk], qa_catalog, strict))
        except (UnparseableResponse, IdMismatch) as exc:
            raise type(exc)(f"chunk {n}/{len(chunks)}: {exc}") from exc
    return ExtractionBatch(tuple(requirements), tuple(records), qa_catalog.codes)
