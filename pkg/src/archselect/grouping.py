"""Step 2: condition clusters, condition groups (CGs), concurrent condition
groups (CCGs) and per-CCG QA weights."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .domain import AsrRecord, ConcurrentConditionGroup, ConditionGroup, QaWeights
from .errors import MalformedAfterRetries, UnknownCgId, UnparseableResponse
from .gateway import RAW, Gateway

log = logging.getLogger(__name__)

LINKAGES = ("average", "complete", "single")

PROMPT2_TEMPLATE = (
    "If the following conditions [{conditions}] mean the same thing, one can infer "
    "another or be considered a subset of another, return 'True.' Otherwise, return "
    "'False.' Answer with the single word True or False."
)

PROMPT3_TEMPLATE = (
    "Organize the provided set of conditions into groups where conditions in the same "
    "group can be true simultaneously. Once grouped, simply return the IDs of the "
    "conditions in each group enclosed in parentheses, e.g. (1, 3) (2, 3).\n\n"
    "Conditions:\n{conditions}"
)


@dataclass(frozen=True)
class ClusteringConfig:
    linkage: str = "average"
    distance: str = "cosine"
    merge_threshold: float = 0.3

    def __post_init__(self):
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}, got {self.linkage!r}")
        if self.distance != "cosine":
            raise ValueError("only cosine distance is supported")
        if not 0.0 < self.merge_threshold < 2.0:
            raise ValueError(f"merge_threshold must lie in (0, 2), got {self.merge_threshold}")


@dataclass(frozen=True)
class ConditionCluster:
    cluster_id: int
    asr_ids: Tuple[str, ...]

    def to_dict(self):
        return {"cluster_id": self.cluster_id, "asr_ids": list(self.asr_ids)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["cluster_id"]), tuple(d["asr_ids"]))


def cosine_distances(vectors) -> np.ndarray:
    x = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-length embedding vector")
    x = x / norms[:, None]
    d = 1.0 - x @ x.T
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 2.0)


def agglomerative_labels(dist: np.ndarray, threshold: float, linkage: str = "average") -> List[int]:
    """Flat agglomerative clustering over a precomputed distance matrix.

    Merges the closest pair while its distance is <= ``threshold``. Each
    cluster lives in the slot of its lowest member index; among equally close
    pairs the lexicographically lowest slot pair merges first. Returns a
    label per point, numbered by first appearance.
    """
    n = dist.shape[0]
    d = np.array(dist, dtype=float)
    np.fill_diagonal(d, np.inf)
    size = np.ones(n)
    owner = np.arange(n)
    for _ in range(n - 1):
        # d is symmetric, so the first row-major minimum is the lowest (i, j), i < j
        k = int(np.argmin(d))
        i, j = divmod(k, n)
        if not d[i, j] <= threshold:
            break
        if linkage == "average":
            new = (size[i] * d[i] + size[j] * d[j]) / (size[i] + size[j])
        elif linkage == "complete":
            new = np.maximum(d[i], d[j])
        else:
            new = np.minimum(d[i], d[j])
        d[i, :] = new
        d[:, i] = new
        d[i, i] = np.inf
        d[j, :] = np.inf
        d[:, j] = np.inf
        size[i] += size[j]
        owner[owner == j] = i
    relabel: Dict[int, int] = {}
    return [relabel.setdefault(int(o), len(relabel)) for o in owner]


def cluster_conditions(
    records: Sequence[AsrRecord],
    gateway: Gateway,
    config: ClusteringConfig = ClusteringConfig(),
) -> List[ConditionCluster]:
    """Cluster ASRs by the embedding of their condition text."""
    asrs = [r for r in records if r.is_asr]
    if not asrs:
        raise ValueError("cluster_conditions needs at least one ASR record")
    distinct = list(dict.fromkeys(r.condition for r in asrs))
    if len(distinct) == 1:
        labels = [0]
    else:
        vectors = gateway.embed(distinct, task="embed-conditions")
        labels = agglomerative_labels(cosine_distances(vectors), config.merge_threshold, config.linkage)
    label_of = dict(zip(distinct, labels))
    members: Dict[int, List[str]] = {}
    for r in asrs:
        members.setdefault(label_of[r.condition], []).append(r.requirement_id)
    # number clusters by their first member's input position
    ordered = sorted(members.values(), key=lambda ids: [r.requirement_id for r in asrs].index(ids[0]))
    return [ConditionCluster(i, tuple(ids)) for i, ids in enumerate(ordered, 1)]


def build_prompt2(cond_a: str, cond_b: str) -> str:
    return PROMPT2_TEMPLATE.format(conditions=f'"{cond_a}", "{cond_b}"')


def _parse_bool(text: str) -> bool:
    token = text.strip().strip(".'\"`*").strip().lower()
    if token == "true":
        return True
    if token == "false":
        return False
    raise ValueError(f"expected True or False, got {text[:60]!r}")


def logic_equiv(cond_a: str, cond_b: str, gateway: Gateway) -> bool:
    if not cond_a.strip() or not cond_b.strip():
        raise ValueError("logic_equiv needs two non-empty conditions")
    if cond_a == cond_b:
        return True
    req = gateway.request(build_prompt2(cond_a, cond_b), RAW, task="prompt2", conditions=[cond_a, cond_b])
    try:
        return _parse_bool(gateway.complete(req, validate=_parse_bool))
    except MalformedAfterRetries as exc:
        raise UnparseableResponse(f"equivalence prompt: {exc}") from exc


def form_condition_groups(
    cluster_records: Sequence[AsrRecord],
    gateway: Gateway,
    first_cg_id: int = 1,
) -> List[ConditionGroup]:
    """Group ASRs whose conditions are equivalent; first match wins."""
    groups: List[Tuple[str, List[str]]] = []
    for asr in cluster_records:
        cond = asr.condition
        for nominal, members in groups:
            if logic_equiv(cond, nominal, gateway):
                members.append(asr.requirement_id)
                break
        else:
            groups.append((cond, [asr.requirement_id]))
    return [
        ConditionGroup(first_cg_id + i, nominal, tuple(members))
        for i, (nominal, members) in enumerate(groups)
    ]


def form_all_condition_groups(
    records: Sequence[AsrRecord],
    clusters: Sequence[ConditionCluster],
    gateway: Gateway,
) -> List[ConditionGroup]:
    """Run :func:`form_condition_groups` per cluster and number the CGs
    globally in cluster order. Clusters run concurrently."""
    by_id = {r.requirement_id: r for r in records}
    per_cluster = [[by_id[i] for i in c.asr_ids] for c in clusters]
    workers = max(1, min(gateway.concurrency, len(per_cluster)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda rs: form_condition_groups(rs, gateway), per_cluster))
    out: List[ConditionGroup] = []
    for groups in results:
        for g in groups:
            out.append(ConditionGroup(len(out) + 1, g.nominal_condition, g.asr_ids))
    return out


def build_prompt3(cgs: Sequence[ConditionGroup]) -> str:
    listing = "\n".join(f"{cg.cg_id}) {cg.nominal_condition}" for cg in cgs)
    return PROMPT3_TEMPLATE.format(conditions=listing)


_TUPLE = re.compile(r"\(([^()]*)\)")


def parse_ccg_response(text: str) -> List[Tuple[int, ...]]:
    groups = []
    for body in _TUPLE.findall(text):
        ids = re.findall(r"-?\d+", body)
        if ids:
            groups.append(tuple(int(i) for i in ids))
    if not groups:
        raise ValueError(f"no parenthesised id groups in {text[:80]!r}")
    return groups


def form_ccgs(cgs: Sequence[ConditionGroup], gateway: Gateway) -> List[ConcurrentConditionGroup]:
    if not cgs:
        raise ValueError("form_ccgs needs at least one condition group")
    if len(cgs) == 1:
        return [ConcurrentConditionGroup(1, (cgs[0].cg_id,))]
    req = gateway.request(
        build_prompt3(cgs), RAW, task="prompt3", conditions=[cg.nominal_condition for cg in cgs]
    )
    try:
        tuples = parse_ccg_response(gateway.complete(req, validate=parse_ccg_response))
    except MalformedAfterRetries as exc:
        raise UnparseableResponse(f"concurrency prompt: {exc}") from exc
    known = {cg.cg_id for cg in cgs}
    sets: List[Tuple[int, ...]] = []
    for t in tuples:
        bad = [i for i in t if i not in known]
        if bad:
            raise UnknownCgId(f"concurrency reply names unknown condition group(s) {bad}")
        key = tuple(sorted(set(t)))
        if key not in sets:
            sets.append(key)
    covered = {i for s in sets for i in s}
    for cg in cgs:
        if cg.cg_id not in covered:
            log.warning("CG %d missing from concurrency reply; adding it as its own CCG", cg.cg_id)
            sets.append((cg.cg_id,))
    return [ConcurrentConditionGroup(i, s) for i, s in enumerate(sets, 1)]


def ccg_asr_ids(ccg: ConcurrentConditionGroup, cgs: Iterable[ConditionGroup]) -> List[str]:
    """Distinct ASR ids in scope of ``ccg``, in CG order."""
    by_id = {cg.cg_id: cg for cg in cgs}
    ids: Dict[str, None] = {}
    for cid in ccg.cg_ids:
        for a in by_id[cid].asr_ids:
            ids[a] = None
    return list(ids)


def compute_qa_weights(
    ccg: ConcurrentConditionGroup,
    cgs: Sequence[ConditionGroup],
    records: Sequence[AsrRecord],
    exclude: Iterable[str] = (),
) -> QaWeights:
    """Count, per QA, the distinct in-scope ASRs implying it."""
    known = {cg.cg_id for cg in cgs}
    missing = [c for c in ccg.cg_ids if c not in known]
    if missing:
        raise UnknownCgId(f"CCG {ccg.ccg_id} references unknown CG(s) {missing}")
    by_id = {r.requirement_id: r for r in records}
    skip = set(exclude)
    counts: Dict[str, int] = {}
    for rid in ccg_asr_ids(ccg, cgs):
        if rid in skip:
            continue
        for qa in by_id[rid].qas:
            counts[qa] = counts.get(qa, 0) + 1
    return QaWeights(counts)
