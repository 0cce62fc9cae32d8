"""End-to-end orchestration: requirements -> ASRs -> CGs/CCGs -> decisions,
plus what-if re-optimisation over a finished run."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .config import RunConfig
from .domain import (
    DEFAULT_CATALOG,
    AirSet,
    ConcurrentConditionGroup,
    ConditionGroup,
    DecisionMatrix,
    DecisionSet,
    QaCatalog,
    QaWeights,
    ScoreReport,
)
from .errors import ArchSelectError, InvariantViolation, UnknownAsrId, UnknownQa
from .extraction import ExtractionBatch, extract_asrs
from .gateway import Gateway, GatewayStats, MockBackend, OpenAICompatibleBackend
from .grouping import (
    ClusteringConfig,
    ConditionCluster,
    cluster_conditions,
    compute_qa_weights,
    form_all_condition_groups,
    form_ccgs,
)
from .io import load_matrix, load_requirements
from .optimizer import OptimizationProblem, TraceabilityReport, score, solve, trace
from .sensitivity import air_size_histogram, find_air_sets, round_half_up

log = logging.getLogger(__name__)

RESULT_VERSION = 1


@dataclass(frozen=True)
class CcgResult:
    ccg: ConcurrentConditionGroup
    weights: QaWeights
    decisions: DecisionSet
    scores: ScoreReport
    trace: TraceabilityReport

    def to_dict(self):
        return {
            "ccg": self.ccg.to_dict(),
            "weights": self.weights.to_dict(),
            "decisions": self.decisions.to_dict(),
            "scores": self.scores.to_dict(),
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ConcurrentConditionGroup.from_dict(d["ccg"]),
            QaWeights.from_dict(d["weights"]),
            DecisionSet.from_dict(d["decisions"]),
            ScoreReport.from_dict(d["scores"]),
            TraceabilityReport.from_dict(d["trace"]),
        )


@dataclass
class PipelineResult:
    matrix: DecisionMatrix
    extraction: Optional[ExtractionBatch] = None
    clusters: List[ConditionCluster] = field(default_factory=list)
    cgs: List[ConditionGroup] = field(default_factory=list)
    ccgs: List[ConcurrentConditionGroup] = field(default_factory=list)
    per_ccg: List[CcgResult] = field(default_factory=list)
    tie_break: str = "first-listed"
    failed_at: Optional[str] = None
    error: Optional[str] = None
    gateway_stats: GatewayStats = field(default_factory=GatewayStats, compare=False)

    @property
    def records(self):
        return list(self.extraction.records) if self.extraction else []

    def ccg_result(self, ccg_id: int) -> CcgResult:
        for r in self.per_ccg:
            if r.ccg.ccg_id == ccg_id:
                return r
        raise KeyError(ccg_id)

    def to_dict(self):
        return {
            "version": RESULT_VERSION,
            "status": "failed" if self.failed_at else "ok",
            "failed_at": self.failed_at,
            "error": self.error,
            "tie_break": self.tie_break,
            "matrix": self.matrix.to_dict(),
            "extraction": self.extraction.to_dict() if self.extraction else None,
            "clusters": [c.to_dict() for c in self.clusters],
            "condition_groups": [c.to_dict() for c in self.cgs],
            "concurrent_condition_groups": [c.to_dict() for c in self.ccgs],
            "results": [r.to_dict() for r in self.per_ccg],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != RESULT_VERSION:
            raise ValueError(f"unsupported result version {d.get('version')!r}")
        return cls(
            matrix=DecisionMatrix.from_dict(d["matrix"]),
            extraction=ExtractionBatch.from_dict(d["extraction"]) if d.get("extraction") else None,
            clusters=[ConditionCluster.from_dict(c) for c in d["clusters"]],
            cgs=[ConditionGroup.from_dict(c) for c in d["condition_groups"]],
            ccgs=[ConcurrentConditionGroup.from_dict(c) for c in d["concurrent_condition_groups"]],
            per_ccg=[CcgResult.from_dict(r) for r in d["results"]],
            tie_break=d.get("tie_break", "first-listed"),
            failed_at=d.get("failed_at"),
            error=d.get("error"),
        )

    @classmethod
    def load(cls, path) -> "PipelineResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class PipelineFailure(ArchSelectError):
    """A step failed; ``partial`` holds everything computed before it."""

    def __init__(self, step: str, cause: BaseException, partial: PipelineResult):
        super().__init__(f"{step}: {cause}")
        self.step = step
        self.cause = cause
        self.partial = partial
        self.exit_code = getattr(cause, "exit_code", 3)


def catalog_for(config: RunConfig) -> QaCatalog:
    return DEFAULT_CATALOG.with_synonyms(config.synonyms) if config.synonyms else DEFAULT_CATALOG


def build_gateway(config: RunConfig) -> Gateway:
    if config.backend == "mock":
        backend = MockBackend.from_file(config.mock_fixture)
    else:
        backend = OpenAICompatibleBackend.from_env(
            config.endpoint_url, config.credential_env_var, timeout=config.timeout
        )
    return Gateway(
        backend,
        cache_dir=config.cache_dir,
        completion_model=config.completion_model,
        embedding_model=config.embedding_model,
        temperature=config.temperature,
        max_retries=config.max_retries,
        concurrency=config.concurrency,
    )


def optimize_ccgs(
    matrix: DecisionMatrix,
    records,
    cgs: Sequence[ConditionGroup],
    ccgs: Sequence[ConcurrentConditionGroup],
    tie_break: str = "first-listed",
) -> List[CcgResult]:
    out = []
    for ccg in ccgs:
        weights = compute_qa_weights(ccg, cgs, records)
        decisions = solve(OptimizationProblem(matrix, weights, tie_break))
        scores = score(matrix, decisions, weights)
        if scores.total != decisions.objective_value:
            raise InvariantViolation(
                f"CCG {ccg.ccg_id}: weighted scores sum to {scores.total}, "
                f"objective is {decisions.objective_value}"
            )
        out.append(CcgResult(ccg, weights, decisions, scores, trace(matrix, decisions, weights, records, ccg, cgs)))
    return out


def run_pipeline(config: RunConfig, gateway: Optional[Gateway] = None) -> PipelineResult:
    """Run all three steps. With ``config.out_dir`` set, writes
    ``result.json``, ``report.txt`` and ``stats.json`` there, including
    on failure (with ``failed_at`` set)."""
    from .report import render_report

    config.check()
    requirements = load_requirements(config.requirements_path)
    matrix = load_matrix(config.matrix_path)
    catalog = catalog_for(config)
    result = PipelineResult(matrix=matrix, tie_break=config.tie_break)
    gateway = gateway or build_gateway(config)
    result.gateway_stats = gateway.stats

    step = "extract"
    try:
        result.extraction = extract_asrs(
            requirements, gateway, catalog, chunk_size=config.chunk_size, strict=config.strict
        )
        records = result.records
        if result.extraction.asrs:
            step = "cluster"
            result.clusters = cluster_conditions(
                records, gateway, ClusteringConfig(config.linkage, "cosine", config.merge_threshold)
            )
            step = "condition-groups"
            result.cgs = form_all_condition_groups(records, result.clusters, gateway)
            step = "concurrent-groups"
            result.ccgs = form_ccgs(result.cgs, gateway)
            step = "optimize"
            result.per_ccg = optimize_ccgs(matrix, records, result.cgs, result.ccgs, config.tie_break)
        else:
            log.warning("no architecturally significant requirements found")
    except ArchSelectError as exc:
        result.failed_at, result.error = step, str(exc)
        _persist(result, config, render_report)
        raise PipelineFailure(step, exc, result) from exc
    _persist(result, config, render_report)
    return result


def _persist(result: PipelineResult, config: RunConfig, render) -> None:
    if not config.out_dir:
        return
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(result.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(render(result), encoding="utf-8")
    (out / "stats.json").write_text(json.dumps(result.gateway_stats.to_dict(), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# what-if


@dataclass(frozen=True)
class WhatIfEntry:
    ccg_id: int
    weights_before: QaWeights
    weights_after: QaWeights
    before: DecisionSet
    after: DecisionSet

    @property
    def changes(self) -> List[Tuple[str, str, str]]:
        return self.before.diff(self.after)

    def to_dict(self):
        return {
            "ccg_id": self.ccg_id,
            "weights_before": self.weights_before.to_dict(),
            "weights_after": self.weights_after.to_dict(),
            "changes": [{"group": g, "before": b, "after": a} for g, b, a in self.changes],
            "after": self.after.to_dict(),
        }


def _select_ccgs(result: PipelineResult, ccg_ids):
    if not ccg_ids:
        return list(result.per_ccg)
    return [result.ccg_result(i) for i in ccg_ids]


def whatif_remove_asr(result: PipelineResult, asr_ids: Sequence[str], ccg_ids=None) -> List[WhatIfEntry]:
    """Re-solve each CCG with ``asr_ids`` dropped from the weight count."""
    asr_ids = list(asr_ids)
    known = {r.requirement_id for r in result.records if r.is_asr}
    unknown = [a for a in asr_ids if a not in known]
    if unknown:
        raise UnknownAsrId(f"not an ASR of this run: {unknown}")
    out = []
    for r in _select_ccgs(result, ccg_ids):
        weights = compute_qa_weights(r.ccg, result.cgs, result.records, exclude=asr_ids)
        after = solve(OptimizationProblem(result.matrix, weights, result.tie_break))
        out.append(WhatIfEntry(r.ccg.ccg_id, r.weights, weights, r.decisions, after))
    return out


def whatif_scale_qa(result: PipelineResult, qa: str, factor: float, ccg_ids=None) -> List[WhatIfEntry]:
    """Re-solve each CCG with one QA weight scaled (rounded half-up)."""
    code = qa.upper()
    if code not in result.matrix.qas and code not in DEFAULT_CATALOG.codes:
        raise UnknownQa(f"unknown quality attribute {qa!r}")
    if factor < 0:
        raise ValueError("scale factor must be non-negative")
    out = []
    for r in _select_ccgs(result, ccg_ids):
        weights = r.weights.replace(code, round_half_up(r.weights[code] * factor))
        after = solve(OptimizationProblem(result.matrix, weights, result.tie_break))
        out.append(WhatIfEntry(r.ccg.ccg_id, r.weights, weights, r.decisions, after))
    return out


def whatif_air_scan(
    result: PipelineResult, ccg_ids=None, removal_order: str = "input-order"
) -> Tuple[Dict[int, List[AirSet]], Dict[int, int]]:
    """AIR sets per CCG and the size histogram over all of them."""
    per: Dict[int, List[AirSet]] = {}
    for r in _select_ccgs(result, ccg_ids):
        if not r.weights.nonzero():
            per[r.ccg.ccg_id] = []
            continue
        per[r.ccg.ccg_id] = find_air_sets(result.records, result.cgs, r.ccg, result.matrix, removal_order)
    return per, air_size_histogram([a for sets in per.values() for a in sets])
