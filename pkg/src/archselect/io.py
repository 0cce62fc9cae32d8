"""Readers and writers for requirements, decision matrices and run
configuration."""

from __future__ import annotations

import configparser
import csv
import io
import json
from pathlib import Path
from typing import List

from .domain import QA_CODES, DecisionMatrix, Requirement, Violation, validate_matrix
from .errors import DuplicateId, InvalidMatrix, MalformedInput


def load_requirements(path) -> List[Requirement]:
    """Read a JSON array of ``{id, text}`` objects or a CSV with an
    ``id,text`` header. Order is preserved; duplicate ids are rejected."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8-sig")
    if not raw.strip():
        raise MalformedInput(f"{path}: file is empty")
    if path.suffix.lower() == ".json" or raw.lstrip()[:1] in "[{":
        rows = _json_requirements(path, raw)
    else:
        rows = _csv_requirements(path, raw)
    out: List[Requirement] = []
    seen = set()
    for pos, rid, text in rows:
        rid = str(rid).strip() if rid is not None else ""
        if not rid:
            raise MalformedInput(f"{path}: {pos}: missing id")
        if not text or not str(text).strip():
            raise MalformedInput(f"{path}: {pos}: requirement {rid} has no text")
        if rid in seen:
            raise DuplicateId(f"{path}: {pos}: duplicate requirement id {rid!r}")
        seen.add(rid)
        out.append(Requirement(rid, str(text).strip()))
    if not out:
        raise MalformedInput(f"{path}: no requirements found")
    return out


def _json_requirements(path, raw):
    try:
        data = json.loads(raw)
    except ValueError as exc:
        raise MalformedInput(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(data, dict) and isinstance(data.get("requirements"), list):
        data = data["requirements"]
    if not isinstance(data, list):
        raise MalformedInput(f"{path}: expected a JSON array of requirements")
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            raise MalformedInput(f"{path}: record {i}: expected an object")
        yield f"record {i}", item.get("id"), item.get("text")


def _csv_requirements(path, raw):
    reader = csv.DictReader(io.StringIO(raw))
    fields = [f.strip().lower() for f in reader.fieldnames or []]
    if "id" not in fields or "text" not in fields:
        raise MalformedInput(f"{path}: CSV header must contain id,text")
    reader.fieldnames = fields
    for row in reader:
        yield f"line {reader.line_num}", row.get("id"), row.get("text")


def load_matrix(path, qa_codes=QA_CODES) -> DecisionMatrix:
    """Read a decision matrix from CSV (``group,choice,<QA codes...>``) or
    from an INI layout with one section per group and one
    ``choice = PE:1, RE:-1`` line per choice. Blank cells are 0."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8-sig")
    if not raw.strip():
        raise MalformedInput(f"{path}: file is empty")
    if path.suffix.lower() in (".ini", ".cfg", ".conf") or raw.lstrip().startswith("["):
        rows, qas, problems = _ini_matrix(path, raw, qa_codes)
    else:
        rows, qas, problems = _csv_matrix(path, raw, qa_codes)
    matrix = DecisionMatrix.from_rows(rows, qas)
    seen = {(v.kind, v.group, v.choice) for v in problems}
    violations = problems + [v for v in validate_matrix(matrix) if (v.kind, v.group, v.choice) not in seen]
    if violations:
        raise InvalidMatrix(violations)
    return matrix


def _cell(value: str, group, choice, code, problems):
    value = (value or "").strip()
    if not value:
        return 0
    try:
        v = int(float(value.replace("−", "-")))
        if v != float(value.replace("−", "-")):
            raise ValueError
    except ValueError:
        problems.append(Violation("NonIntegerImpact", group, choice, f"{code}={value!r}"))
        return 0
    if v not in (-1, 0, 1):
        problems.append(Violation("ImpactOutOfRange", group, choice, f"{code}={v}"))
    return v


def _csv_matrix(path, raw, qa_codes):
    reader = csv.reader(io.StringIO(raw))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedInput(f"{path}: empty CSV") from None
    if [h.lower() for h in header[:2]] != ["group", "choice"]:
        raise MalformedInput(f"{path}: header must start with group,choice")
    qas = [h.upper() for h in header[2:]]
    unknown = [q for q in qas if q not in qa_codes]
    if unknown or not qas:
        raise MalformedInput(f"{path}: unknown or missing QA columns {unknown}")
    rows, problems = [], []
    group = None
    for lineno, cells in enumerate(reader, start=2):
        if not any(c.strip() for c in cells):
            continue
        if len(cells) > len(header):
            raise MalformedInput(f"{path}: line {lineno}: {len(cells)} cells, header has {len(header)}")
        cells = cells + [""] * (len(header) - len(cells))
        # a blank group cell continues the previous group (spreadsheet style)
        group = cells[0].strip() or group
        choice = cells[1].strip()
        if not group or not choice:
            raise MalformedInput(f"{path}: line {lineno}: missing group or choice")
        impacts = {q: _cell(v, group, choice, q, problems) for q, v in zip(qas, cells[2:])}
        rows.append((group, choice, {q: v for q, v in impacts.items() if v}))
    return rows, tuple(qas), problems


def _ini_matrix(path, raw, qa_codes):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(raw)
    except configparser.Error as exc:
        raise MalformedInput(f"{path}: {exc}") from exc
    rows, problems = [], []
    for group in parser.sections():
        for choice, spec in parser.items(group):
            impacts = {}
            for part in filter(None, (p.strip() for p in spec.split(","))):
                if ":" not in part:
                    raise MalformedInput(f"{path}: [{group}] {choice}: expected QA:value, got {part!r}")
                code, value = (s.strip() for s in part.split(":", 1))
                code = code.upper()
                if code not in qa_codes:
                    raise MalformedInput(f"{path}: [{group}] {choice}: unknown QA {code!r}")
                v = _cell(value, group, choice, code, problems)
                if v:
                    impacts[code] = v
            rows.append((group, choice, impacts))
    return rows, tuple(qa_codes), problems


def dump_matrix_csv(matrix: DecisionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "choice", *matrix.qas])
    for g in matrix.groups:
        for c in g.choices:
            w.writerow([g.name, c.name, *(c.impact(q) for q in matrix.qas)])
    return buf.getvalue()
