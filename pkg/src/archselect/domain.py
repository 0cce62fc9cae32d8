"""Core data model shared by every pipeline step.

All types are frozen dataclasses with ``to_dict``/``from_dict`` pairs so
they round-trip through the JSON result file unchanged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import UnknownQaLabel

DEFAULT_CONDITION = "under any circumstances"


@dataclass(frozen=True)
class QualityAttribute:
    code: str
    name: str
    description: str


@dataclass(frozen=True)
class QaCatalog:
    """Ordered set of quality attributes plus the label synonyms used to
    resolve free-form LLM output onto catalog codes."""

    attributes: Tuple[QualityAttribute, ...]
    synonyms: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        codes = [qa.code for qa in self.attributes]
        if len(set(codes)) != len(codes):
            raise ValueError(f"duplicate QA codes in catalog: {codes}")
        unknown = [c for _, c in self.synonyms if c not in codes]
        if unknown:
            raise ValueError(f"synonyms point at unknown codes: {unknown}")

    @property
    def codes(self) -> Tuple[str, ...]:
        return tuple(qa.code for qa in self.attributes)

    def __len__(self):
        return len(self.attributes)

    def __iter__(self):
        return iter(self.attributes)

    def __getitem__(self, code: str) -> QualityAttribute:
        for qa in self.attributes:
            if qa.code == code:
                return qa
        raise KeyError(code)

    def index(self, code: str) -> int:
        return self.codes.index(code)

    def with_synonyms(self, extra: Mapping[str, str]) -> "QaCatalog":
        merged = dict(self.synonyms)
        merged.update({_norm(k): v.upper() for k, v in extra.items()})
        return QaCatalog(self.attributes, tuple(merged.items()))

    def with_attributes(self, extra: Iterable[QualityAttribute]) -> "QaCatalog":
        return QaCatalog(self.attributes + tuple(extra), self.synonyms)

    def resolve(self, label: str) -> str:
        """Map a free-form label onto a catalog code.

        Matching is case-insensitive against code, display name and the
        synonym table. Labels written as ``"Name (CODE)"`` are accepted.
        """
        if not label or not label.strip():
            raise UnknownQaLabel(label)
        key = _norm(label)
        by_code = {c.lower(): c for c in self.codes}
        by_name = {_norm(qa.name): qa.code for qa in self.attributes}
        syn = dict(self.synonyms)
        for table in (by_code, by_name, syn):
            if key in table:
                return table[key]
        m = re.fullmatch(r"(.+?)\s*\((\w+)\)", key)
        if m:
            for part in (m.group(2), m.group(1)):
                for table in (by_code, by_name, syn):
                    if part in table:
                        return table[part]
        raise UnknownQaLabel(label)


def _norm(label: str) -> str:
    return " ".join(label.strip().strip(".,;:'\"").lower().replace("_", " ").split())


DEFAULT_QAS = (
    QualityAttribute(
        "PE", "Performance Efficiency",
        "Relates to the performance relative to the resources used under stated "
        "conditions. Sub-characteristics include time behavior, resource "
        "utilization, and capacity.",
    ),
    QualityAttribute(
        "CO", "Compatibility",
        "Assesses software's ability to co-exist with independent software in a "
        "common environment sharing resources. It includes interoperability, "
        "co-existence, and compliance.",
    ),
    QualityAttribute(
        "IC", "Interaction Capability",
        "Measures how easy and satisfying the software is. It covers "
        "appropriateness recognizability, learnability, operability, user error "
        "protection, user interface aesthetics, and accessibility.",
    ),
    QualityAttribute(
        "RE", "Reliability",
        "Measures the software's capacity to maintain its performance level under "
        "stated conditions for a stated period. It includes maturity, fault "
        "tolerance, and recoverability.",
    ),
    QualityAttribute(
        "SE", "Security",
        "Covers the software's ability to protect information and data, ensuring "
        "confidentiality, integrity, non-repudiation, accountability, and "
        "authenticity.",
    ),
    QualityAttribute(
        "MA", "Maintainability",
        "Measures how easy it is to modify the software. It includes modularity, "
        "reusability, analyzability, modifiability, and testability.",
    ),
    QualityAttribute(
        "FL", "Flexibility",
        "Measures the ease with which the software can be transferred from one "
        "environment to another. It includes adaptability, installability, "
        "replaceability, and flexibility compliance.",
    ),
    QualityAttribute(
        "CE", "Cost Efficiency",
        "Emphasizes minimizing financial resources in software development, "
        "maintenance, and operation to stay within budget.",
    ),
)

DEFAULT_SYNONYMS = (
    ("performance", "PE"),
    ("efficiency", "PE"),
    ("usability", "IC"),
    ("interaction", "IC"),
    ("portability", "FL"),
    ("cost", "CE"),
    ("interoperability", "CO"),
)

DEFAULT_CATALOG = QaCatalog(DEFAULT_QAS, DEFAULT_SYNONYMS)
QA_CODES = DEFAULT_CATALOG.codes


def qa_from_label(label: str, catalog: QaCatalog = DEFAULT_CATALOG) -> str:
    """Return the catalog code for ``label``; raises UnknownQaLabel."""
    return catalog.resolve(label)


# ---------------------------------------------------------------------------
# requirements and step-1 output


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str

    def __post_init__(self):
        if not self.id or not str(self.id).strip():
            raise ValueError("requirement id must be non-empty")
        if not self.text or not self.text.strip():
            raise ValueError(f"requirement {self.id} has empty text")

    def to_dict(self):
        return {"id": self.id, "text": self.text}

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["id"]), d["text"])


@dataclass(frozen=True)
class AsrRecord:
    requirement_id: str
    is_asr: bool
    qas: Tuple[str, ...] = ()
    condition: str = ""

    def __post_init__(self):
        if self.is_asr:
            if not self.qas:
                raise ValueError(f"ASR {self.requirement_id} has no QAs")
            if not self.condition.strip():
                object.__setattr__(self, "condition", DEFAULT_CONDITION)
        elif self.qas:
            raise ValueError(f"non-ASR {self.requirement_id} carries QAs")
        if len(set(self.qas)) != len(self.qas):
            object.__setattr__(self, "qas", tuple(dict.fromkeys(self.qas)))

    def to_dict(self):
        return {
            "requirement_id": self.requirement_id,
            "is_asr": self.is_asr,
            "qas": list(self.qas),
            "condition": self.condition,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["requirement_id"], bool(d["is_asr"]), tuple(d["qas"]), d["condition"])


# ---------------------------------------------------------------------------
# step-2 output


@dataclass(frozen=True)
class ConditionGroup:
    cg_id: int
    nominal_condition: str
    asr_ids: Tuple[str, ...]

    def __post_init__(self):
        if not self.asr_ids:
            raise ValueError(f"condition group {self.cg_id} is empty")

    def to_dict(self):
        return {
            "cg_id": self.cg_id,
            "nominal_condition": self.nominal_condition,
            "asr_ids": list(self.asr_ids),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["cg_id"]), d["nominal_condition"], tuple(d["asr_ids"]))


@dataclass(frozen=True)
class ConcurrentConditionGroup:
    ccg_id: int
    cg_ids: Tuple[int, ...]

    def __post_init__(self):
        if not self.cg_ids:
            raise ValueError(f"CCG {self.ccg_id} is empty")
        object.__setattr__(self, "cg_ids", tuple(sorted(set(self.cg_ids))))

    def to_dict(self):
        return {"ccg_id": self.ccg_id, "cg_ids": list(self.cg_ids)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["ccg_id"]), tuple(int(i) for i in d["cg_ids"]))


@dataclass(frozen=True)
class QaWeights:
    """Per-QA integer weights; absent codes weigh 0."""

    weights: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for code, w in self.weights.items():
            if int(w) != w or w < 0:
                raise ValueError(f"weight for {code} must be a non-negative integer, got {w}")
        # canonical key order (catalog first, then alphabetical) keeps output stable
        rank = {c: i for i, c in enumerate(QA_CODES)}
        ordered = sorted(self.weights, key=lambda c: (rank.get(c, len(rank)), c))
        object.__setattr__(self, "weights", {c: int(self.weights[c]) for c in ordered})

    def __getitem__(self, code: str) -> int:
        return self.weights.get(code, 0)

    def get(self, code: str, default: int = 0) -> int:
        return self.weights.get(code, default)

    def nonzero(self) -> Dict[str, int]:
        return {c: w for c, w in self.weights.items() if w}

    def as_vector(self, codes: Sequence[str]) -> List[int]:
        return [self[c] for c in codes]

    def replace(self, code: str, value: int) -> "QaWeights":
        w = dict(self.weights)
        w[code] = value
        return QaWeights(w)

    def __eq__(self, other):
        if not isinstance(other, QaWeights):
            return NotImplemented
        return self.nonzero() == other.nonzero()

    def to_dict(self, codes: Sequence[str] = QA_CODES):
        out = {c: self[c] for c in codes}
        out.update({c: w for c, w in self.weights.items() if c not in out})
        return out

    @classmethod
    def from_dict(cls, d):
        return cls({k: int(v) for k, v in d.items()})


# ---------------------------------------------------------------------------
# decision matrix


@dataclass(frozen=True)
class Choice:
    name: str
    impacts: Dict[str, int] = field(default_factory=dict)

    def impact(self, code: str) -> int:
        return self.impacts.get(code, 0)

    def to_dict(self):
        return {"name": self.name, "impacts": dict(self.impacts)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], {k: int(v) for k, v in d["impacts"].items()})


@dataclass(frozen=True)
class DecisionGroup:
    name: str
    choices: Tuple[Choice, ...]

    def choice(self, name: str) -> Choice:
        for c in self.choices:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def choice_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.choices)

    def to_dict(self):
        return {"name": self.name, "choices": [c.to_dict() for c in self.choices]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], tuple(Choice.from_dict(c) for c in d["choices"]))


@dataclass(frozen=True)
class DecisionMatrix:
    groups: Tuple[DecisionGroup, ...]
    qas: Tuple[str, ...] = QA_CODES

    def group(self, name: str) -> DecisionGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    @property
    def n_choices(self) -> int:
        return sum(len(g.choices) for g in self.groups)

    def to_dict(self):
        return {"qas": list(self.qas), "groups": [g.to_dict() for g in self.groups]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(DecisionGroup.from_dict(g) for g in d["groups"]), tuple(d["qas"]))

    @classmethod
    def from_rows(cls, rows, qas: Sequence[str] = QA_CODES) -> "DecisionMatrix":
        """Build from ``(group, choice, {qa: impact})`` rows; groups keep
        first-appearance order."""
        order: Dict[str, List[Choice]] = {}
        for group, choice, impacts in rows:
            order.setdefault(group, []).append(Choice(choice, dict(impacts)))
        return cls(tuple(DecisionGroup(g, tuple(cs)) for g, cs in order.items()), tuple(qas))


@dataclass(frozen=True)
class Violation:
    kind: str
    group: Optional[str] = None
    choice: Optional[str] = None
    detail: str = ""

    def __str__(self):
        where = "/".join(x for x in (self.group, self.choice) if x)
        return f"{self.kind}({where}){': ' + self.detail if self.detail else ''}"


def validate_matrix(matrix: DecisionMatrix) -> List[Violation]:
    """Return every invariant breach in ``matrix``; empty means valid."""
    out: List[Violation] = []
    if not matrix.groups:
        out.append(Violation("EmptyMatrix"))
    seen_groups = set()
    for g in matrix.groups:
        if g.name in seen_groups:
            out.append(Violation("DuplicateGroup", g.name))
        seen_groups.add(g.name)
        if len(g.choices) < 2:
            out.append(Violation("GroupTooSmall", g.name, detail=f"{len(g.choices)} choice(s)"))
        seen_choices = set()
        for c in g.choices:
            if c.name in seen_choices:
                out.append(Violation("DuplicateChoice", g.name, c.name))
            seen_choices.add(c.name)
            for code, v in c.impacts.items():
                if code not in matrix.qas:
                    out.append(Violation("UnknownQaColumn", g.name, c.name, code))
                if v not in (-1, 0, 1):
                    out.append(Violation("ImpactOutOfRange", g.name, c.name, f"{code}={v}"))
    return out


# ---------------------------------------------------------------------------
# step-3 output


@dataclass(frozen=True)
class GroupDecision:
    group: str
    chosen: str
    tie_set: Tuple[str, ...]
    value: int

    def __post_init__(self):
        if self.chosen not in self.tie_set:
            raise ValueError(f"{self.group}: chosen {self.chosen!r} not in tie set")

    def to_dict(self):
        return {
            "group": self.group,
            "chosen": self.chosen,
            "tie_set": list(self.tie_set),
            "value": self.value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["group"], d["chosen"], tuple(d["tie_set"]), int(d["value"]))


@dataclass(frozen=True)
class DecisionSet:
    decisions: Tuple[GroupDecision, ...]
    objective_value: int

    @property
    def chosen(self) -> Dict[str, str]:
        return {d.group: d.chosen for d in self.decisions}

    def __getitem__(self, group: str) -> GroupDecision:
        for d in self.decisions:
            if d.group == group:
                return d
        raise KeyError(group)

    def diff(self, other: "DecisionSet") -> List[Tuple[str, str, str]]:
        """``(group, self choice, other choice)`` for every group whose
        chosen choice differs."""
        theirs = other.chosen
        return [
            (d.group, d.chosen, theirs.get(d.group))
            for d in self.decisions
            if theirs.get(d.group) != d.chosen
        ]

    def to_dict(self):
        return {
            "decisions": [d.to_dict() for d in self.decisions],
            "objective_value": self.objective_value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(GroupDecision.from_dict(x) for x in d["decisions"]), int(d["objective_value"]))


@dataclass(frozen=True)
class QaScore:
    qa: str
    raw: int
    weight: int

    @property
    def weighted(self) -> int:
        return self.raw * self.weight


@dataclass(frozen=True)
class ScoreReport:
    scores: Tuple[QaScore, ...]

    def __getitem__(self, code: str) -> QaScore:
        for s in self.scores:
            if s.qa == code:
                return s
        raise KeyError(code)

    @property
    def total(self) -> int:
        return sum(s.weighted for s in self.scores)

    def to_dict(self):
        return {s.qa: {"raw": s.raw, "weight": s.weight, "weighted": s.weighted} for s in self.scores}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(QaScore(k, int(v["raw"]), int(v["weight"])) for k, v in d.items()))


@dataclass(frozen=True)
class AirSet:
    removed_asr_ids: Tuple[str, ...]
    sensitive_qa: str
    before: DecisionSet
    after: DecisionSet

    def __post_init__(self):
        if not self.removed_asr_ids:
            raise ValueError("AIR set must contain at least one ASR")
        if not self.before.diff(self.after):
            raise ValueError("AIR set before/after decisions are identical")

    @property
    def size(self) -> int:
        return len(self.removed_asr_ids)

    def to_dict(self):
        return {
            "removed_asr_ids": list(self.removed_asr_ids),
            "sensitive_qa": self.sensitive_qa,
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "changes": [list(c) for c in self.before.diff(self.after)],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["removed_asr_ids"]),
            d["sensitive_qa"],
            DecisionSet.from_dict(d["before"]),
            DecisionSet.from_dict(d["after"]),
        )
