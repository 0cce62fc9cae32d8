import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from archselect.domain import AsrRecord, ConcurrentConditionGroup, ConditionGroup
from archselect.errors import UnknownCgId, UnparseableResponse
from archselect.extraction import extract_asrs
from archselect.gateway import Gateway, MockBackend
from archselect.grouping import (
    ClusteringConfig,
    agglomerative_labels,
    ccg_asr_ids,
    cluster_conditions,
    compute_qa_weights,
    cosine_distances,
    form_all_condition_groups,
    form_ccgs,
    form_condition_groups,
    logic_equiv,
    parse_ccg_response,
)

from . import strategies as S
from .oracle import cosine_distance, count_weights


def _partition(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, set()).add(i)
    return {frozenset(g) for g in groups.values()}


@pytest.mark.parametrize("method", ["average", "complete", "single"])
@pytest.mark.parametrize("seed", range(15))
def test_clustering_matches_scipy(method, seed):
    rng = np.random.default_rng(seed)
    centres = rng.normal(size=(3, 6))
    pts = np.vstack([c + 0.35 * rng.normal(size=(4, 6)) for c in centres])
    dist = cosine_distances(pts)
    ours = agglomerative_labels(dist, 0.3, method)
    ref = fcluster(linkage(squareform(dist, checks=False), method), t=0.3, criterion="distance")
    assert _partition(ours) == _partition(ref)


def test_cosine_distances_match_oracle():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 4))
    d = cosine_distances(x)
    for i in range(5):
        for j in range(5):
            expected = 0.0 if i == j else cosine_distance(x[i], x[j])
            assert d[i, j] == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        cosine_distances([[0.0, 0.0], [1.0, 0.0]])


def test_clustering_config_validation():
    with pytest.raises(ValueError):
        ClusteringConfig(linkage="ward")
    with pytest.raises(ValueError):
        ClusteringConfig(distance="euclidean")
    with pytest.raises(ValueError):
        ClusteringConfig(merge_threshold=0)


@pytest.fixture
def ums_records(ums_requirements, ums_gateway):
    return extract_asrs(ums_requirements, ums_gateway).records


def test_ums_clusters(ums_records, ums_gateway):
    clusters = cluster_conditions(ums_records, ums_gateway)
    assert [c.asr_ids for c in clusters] == [("R1", "R7"), ("R2", "R3", "R6", "R9")]


def test_identical_conditions_share_a_cluster(mock_gateway):
    recs = [
        AsrRecord("A", True, ("PE",), "at night"),
        AsrRecord("B", True, ("RE",), "under heavy load"),
        AsrRecord("C", True, ("SE",), "at night"),
    ]
    clusters = cluster_conditions(recs, mock_gateway)
    owner = {a: c.cluster_id for c in clusters for a in c.asr_ids}
    assert owner["A"] == owner["C"]


def test_single_condition_needs_no_embedding(mock_gateway):
    recs = [AsrRecord("A", True, ("PE",), "x"), AsrRecord("B", True, ("RE",), "x")]
    assert len(cluster_conditions(recs, mock_gateway)) == 1
    assert mock_gateway.stats.embedding_calls == 0


def test_logic_equiv(ums_gateway):
    assert logic_equiv("In normal conditions", "During a disaster", ums_gateway) is False
    assert logic_equiv("during a disaster", "in case of a disaster", ums_gateway) is True
    calls = ums_gateway.stats.completion_calls
    assert logic_equiv("at night", "at night", ums_gateway) is True
    assert ums_gateway.stats.completion_calls == calls
    with pytest.raises(ValueError):
        logic_equiv("", "x", ums_gateway)


def test_logic_equiv_unparseable():
    gw = Gateway(MockBackend({"responses": {}}), max_retries=1)
    gw.backend._responses = {}
    gw.backend.complete = lambda *a: "Maybe"
    with pytest.raises(UnparseableResponse):
        logic_equiv("a", "b", gw)
    assert gw.stats.completion_calls == 2


def test_algorithm1_first_match_wins(ums_records, ums_gateway):
    by = {r.requirement_id: r for r in ums_records}
    cgs = form_condition_groups([by[i] for i in ("R2", "R3", "R6", "R9")], ums_gateway)
    assert len(cgs) == 1
    assert cgs[0].nominal_condition == "In the event of infrastructure failure"
    assert cgs[0].asr_ids == ("R2", "R3", "R6", "R9")


def test_algorithm1_all_distinct(mock_gateway):
    recs = [AsrRecord(f"R{i}", True, ("PE",), f"condition {i}") for i in range(6)]
    cgs = form_condition_groups(recs, mock_gateway, first_cg_id=5)
    assert [cg.cg_id for cg in cgs] == list(range(5, 11))
    assert mock_gateway.stats.completion_calls == 6 * 5 // 2


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12))
def test_algorithm1_worst_case_call_count(n):
    gw = Gateway(MockBackend({}))
    form_condition_groups([AsrRecord(f"R{i}", True, ("PE",), f"c{i}") for i in range(n)], gw)
    assert gw.stats.completion_calls == n * (n - 1) // 2


def test_ums_condition_groups_and_ccgs(ums_records, ums_gateway):
    clusters = cluster_conditions(ums_records, ums_gateway)
    cgs = form_all_condition_groups(ums_records, clusters, ums_gateway)
    assert [(cg.cg_id, cg.asr_ids) for cg in cgs] == [(1, ("R1", "R7")), (2, ("R2", "R3", "R6", "R9"))]
    ccgs = form_ccgs(cgs, ums_gateway)
    assert [c.cg_ids for c in ccgs] == [(1,), (2,)]


def test_form_ccgs_overlapping(ums_gateway):
    cgs = [
        ConditionGroup(1, "normal condition", ("A",)),
        ConditionGroup(2, "disaster response", ("B",)),
        ConditionGroup(3, "under any circumstances", ("C",)),
    ]
    ccgs = form_ccgs(cgs, ums_gateway)
    assert [c.cg_ids for c in ccgs] == [(1, 3), (2, 3)]


def test_form_ccgs_single_cg_skips_llm(mock_gateway):
    ccgs = form_ccgs([ConditionGroup(1, "x", ("A",))], mock_gateway)
    assert [c.cg_ids for c in ccgs] == [(1,)]
    assert mock_gateway.stats.completion_calls == 0


def _cgs3():
    return [ConditionGroup(i, f"c{i}", (f"R{i}",)) for i in (1, 2, 3)]


def test_form_ccgs_repairs_missing_cg():
    fixture = {"concurrent": [{"conditions": ["c1", "c2", "c3"], "response": "(1, 2)"}]}
    ccgs = form_ccgs(_cgs3(), Gateway(MockBackend(fixture)))
    assert [c.cg_ids for c in ccgs] == [(1, 2), (3,)]


def test_form_ccgs_unknown_id():
    fixture = {"concurrent": [{"conditions": ["c1", "c2", "c3"], "response": "(1, 4) (2, 3)"}]}
    with pytest.raises(UnknownCgId):
        form_ccgs(_cgs3(), Gateway(MockBackend(fixture)))


def test_parse_ccg_response():
    assert parse_ccg_response("Groups: (1, 3) (2,3)") == [(1, 3), (2, 3)]
    with pytest.raises(ValueError):
        parse_ccg_response("none")


def test_ums_weights(ums_records):
    cgs = [ConditionGroup(1, "n", ("R1", "R7")), ConditionGroup(2, "d", ("R2", "R3", "R6", "R9"))]
    w_all = compute_qa_weights(ConcurrentConditionGroup(0, (1, 2)), cgs, ums_records)
    assert w_all.nonzero() == {"PE": 1, "IC": 2, "RE": 4, "SE": 1}
    assert compute_qa_weights(ConcurrentConditionGroup(1, (1,)), cgs, ums_records).nonzero() == {"PE": 1, "SE": 1}
    assert compute_qa_weights(ConcurrentConditionGroup(2, (2,)), cgs, ums_records).nonzero() == {"IC": 2, "RE": 4}
    with pytest.raises(UnknownCgId):
        compute_qa_weights(ConcurrentConditionGroup(3, (9,)), cgs, ums_records)


def test_asr_in_two_cgs_of_a_ccg_counts_once():
    recs = [AsrRecord("R1", True, ("PE",), "x")]
    cgs = [ConditionGroup(1, "x", ("R1",)), ConditionGroup(2, "y", ("R1",))]
    assert compute_qa_weights(ConcurrentConditionGroup(1, (1, 2)), cgs, recs)["PE"] == 1


@settings(max_examples=200, deadline=None)
@given(S.asr_populations(), st.data())
def test_weights_match_oracle_and_are_monotone(pop, data):
    recs, cgs, ccg = pop
    qas = {r.requirement_id: r.qas for r in recs}
    w = compute_qa_weights(ccg, cgs, recs)
    assert w.nonzero() == count_weights(ccg_asr_ids(ccg, cgs), qas)
    scope = ccg_asr_ids(ccg, cgs)
    drop = data.draw(st.lists(st.sampled_from(scope), unique=True))
    w2 = compute_qa_weights(ccg, cgs, recs, exclude=drop)
    assert all(w2[c] <= w[c] for c in w.weights)
    assert w2.nonzero() == count_weights([r for r in scope if r not in drop], qas)
