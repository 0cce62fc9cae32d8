"""Step 3: pick one choice per decision group maximising the weighted QA
satisfaction score, then score and trace the result.

The objective is ``sum_j W_j * sum_i M_ij x_i`` with exactly one ``x_i = 1``
per group. Groups share no variables, so the optimum is the per-group argmax
of ``sum_j M_ij W_j``. ``method="milp"`` solves the same problem as a 0/1
program with scipy instead, which is useful as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .domain import (
    AsrRecord,
    Choice,
    ConcurrentConditionGroup,
    ConditionGroup,
    DecisionMatrix,
    DecisionSet,
    GroupDecision,
    QaScore,
    QaWeights,
    ScoreReport,
    validate_matrix,
)
from .errors import ChoiceNotInMatrix, InvalidProblem
from .grouping import ccg_asr_ids

TIE_BREAKS = ("first-listed", "report-all")


@dataclass(frozen=True)
class OptimizationProblem:
    matrix: DecisionMatrix
    weights: QaWeights
    tie_break: str = "first-listed"

    def check(self):
        if self.tie_break not in TIE_BREAKS:
            raise InvalidProblem(f"tie_break must be one of {TIE_BREAKS}")
        violations = validate_matrix(self.matrix)
        if violations:
            raise InvalidProblem("; ".join(map(str, violations)))
        for code, w in self.weights.weights.items():
            if w < 0:
                raise InvalidProblem(f"negative weight for {code}")


def choice_value(choice: Choice, weights: QaWeights) -> int:
    return sum(v * weights[code] for code, v in choice.impacts.items())


def solve(problem: OptimizationProblem, method: str = "argmax") -> DecisionSet:
    problem.check()
    if method == "milp":
        return _solve_milp(problem)
    if method != "argmax":
        raise InvalidProblem(f"unknown method {method!r}")
    decisions = []
    for g in problem.matrix.groups:
        values = [choice_value(c, problem.weights) for c in g.choices]
        best = max(values)
        ties = tuple(c.name for c, v in zip(g.choices, values) if v == best)
        decisions.append(GroupDecision(g.name, ties[0], ties, best))
    return DecisionSet(tuple(decisions), sum(d.value for d in decisions))


def _solve_milp(problem: OptimizationProblem) -> DecisionSet:
    from scipy.optimize import Bounds, LinearConstraint, milp

    groups = problem.matrix.groups
    values = np.array(
        [choice_value(c, problem.weights) for g in groups for c in g.choices], dtype=float
    )
    n = values.size
    a = np.zeros((len(groups), n))
    col = 0
    for gi, g in enumerate(groups):
        a[gi, col:col + len(g.choices)] = 1
        col += len(g.choices)
    # tiny first-listed preference; every value is an integer, so this never
    # overturns a strictly better choice
    bias = -np.arange(n) * (0.5 / (n + 1)) / max(len(groups), 1)
    res = milp(
        c=-(values + bias),
        constraints=LinearConstraint(a, 1, 1),
        integrality=np.ones(n),
        bounds=Bounds(0, 1),
    )
    if not res.success:
        raise InvalidProblem(f"MILP solver failed: {res.message}")
    x = np.round(res.x).astype(int)
    decisions = []
    col = 0
    for g in groups:
        vals = values[col:col + len(g.choices)].astype(int)
        pick = int(np.argmax(x[col:col + len(g.choices)]))
        best = int(vals.max())
        ties = tuple(c.name for c, v in zip(g.choices, vals) if v == best)
        decisions.append(GroupDecision(g.name, g.choices[pick].name, ties, int(vals[pick])))
        col += len(g.choices)
    return DecisionSet(tuple(decisions), sum(d.value for d in decisions))


def score(matrix: DecisionMatrix, decisions: DecisionSet, weights: QaWeights) -> ScoreReport:
    """Raw per-QA satisfaction score of the chosen choices, and weighted."""
    chosen = []
    for d in decisions.decisions:
        try:
            chosen.append(matrix.group(d.group).choice(d.chosen))
        except KeyError:
            raise ChoiceNotInMatrix(f"{d.group}/{d.chosen} is not in the matrix") from None
    codes = list(matrix.qas) + [c for c in weights.weights if c not in matrix.qas]
    return ScoreReport(
        tuple(QaScore(code, sum(c.impact(code) for c in chosen), weights[code]) for code in codes)
    )


def decision_set_from_choices(matrix: DecisionMatrix, choices: Dict[str, str], weights: QaWeights) -> DecisionSet:
    """Build a DecisionSet for a given selection (e.g. a published table)."""
    decisions = []
    for g in matrix.groups:
        name = choices[g.name]
        try:
            picked = g.choice(name)
        except KeyError:
            raise ChoiceNotInMatrix(f"{g.name}/{name} is not in the matrix") from None
        v = choice_value(picked, weights)
        ties = tuple(c.name for c in g.choices if choice_value(c, weights) == v)
        decisions.append(GroupDecision(g.name, name, ties, v))
    return DecisionSet(tuple(decisions), sum(d.value for d in decisions))


@dataclass(frozen=True)
class Support:
    qa: str
    weight: int
    asr_ids: Tuple[str, ...]


@dataclass(frozen=True)
class TraceabilityReport:
    by_choice: Dict[str, Tuple[Support, ...]] = field(default_factory=dict)
    by_asr: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def to_dict(self):
        return {
            "by_choice": {
                k: [{"qa": s.qa, "weight": s.weight, "asr_ids": list(s.asr_ids)} for s in v]
                for k, v in self.by_choice.items()
            },
            "by_asr": {k: list(v) for k, v in self.by_asr.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            {
                k: tuple(Support(s["qa"], int(s["weight"]), tuple(s["asr_ids"])) for s in v)
                for k, v in d["by_choice"].items()
            },
            {k: tuple(v) for k, v in d["by_asr"].items()},
        )


def _choice_key(group: str, choice: str) -> str:
    return f"{group}: {choice}"


def trace(
    matrix: DecisionMatrix,
    decisions: DecisionSet,
    weights: QaWeights,
    records: Sequence[AsrRecord],
    ccg: ConcurrentConditionGroup,
    cgs: Sequence[ConditionGroup],
) -> TraceabilityReport:
    """Link each chosen choice to the weighted QAs it supports and the ASRs
    behind those QAs; keys are ``"<group>: <choice>"``."""
    by_id = {r.requirement_id: r for r in records}
    in_scope = ccg_asr_ids(ccg, cgs)
    by_choice: Dict[str, Tuple[Support, ...]] = {}
    by_asr: Dict[str, List[str]] = {rid: [] for rid in in_scope}
    for d in decisions.decisions:
        choice = matrix.group(d.group).choice(d.chosen)
        key = _choice_key(d.group, d.chosen)
        support = []
        for code in matrix.qas:
            if choice.impact(code) > 0 and weights[code] > 0:
                asrs = tuple(r for r in in_scope if code in by_id[r].qas)
                support.append(Support(code, weights[code], asrs))
                for r in asrs:
                    if key not in by_asr[r]:
                        by_asr[r].append(key)
        by_choice[key] = tuple(support)
    return TraceabilityReport(by_choice, {k: tuple(v) for k, v in by_asr.items()})
