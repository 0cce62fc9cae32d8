import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from archselect.domain import (
    AsrRecord,
    Choice,
    ConcurrentConditionGroup,
    ConditionGroup,
    DecisionGroup,
    DecisionMatrix,
    QaWeights,
)
from archselect.errors import InvalidDeviation, NoAsrsForQa
from archselect.sensitivity import (
    LATENCY_PRESETS,
    air_size_histogram,
    estimate_runtime,
    find_air_sets,
    humanize_seconds,
    qa_sensitivity,
    round_half_up,
)

TOY = DecisionMatrix(
    (
        DecisionGroup("G1", (Choice("Y", {"PE": 1}), Choice("X", {"RE": 1}))),
        DecisionGroup("G2", (Choice("P", {"SE": 1}), Choice("Q"))),
    )
)


def _population(qas_per_asr):
    recs = [AsrRecord(f"R{i}", True, qas, "always") for i, qas in enumerate(qas_per_asr, 1)]
    cgs = [ConditionGroup(1, "always", tuple(r.requirement_id for r in recs))]
    return recs, cgs, ConcurrentConditionGroup(1, (1,))


@pytest.mark.parametrize("x, expected", [(0.5, 1), (1.5, 2), (2.5, 3), (1.4, 1), (0.49, 0), (-0.7, 0)])
def test_round_half_up(x, expected):
    assert round_half_up(x) == expected


def test_sensitivity_counts():
    rep = qa_sensitivity(TOY, QaWeights({"RE": 2, "PE": 1, "SE": 1}))
    assert rep.change_count["RE"] == 7
    assert rep.change_count["PE"] == 5
    assert rep.change_count["SE"] == 0
    assert rep.ranking == ("RE", "PE", "SE")
    assert rep.most_sensitive == "RE"


def test_sensitivity_ties_follow_catalog_order():
    m = DecisionMatrix((DecisionGroup("G", (Choice("A"), Choice("B"))),))
    rep = qa_sensitivity(m, QaWeights({"SE": 1, "PE": 1}))
    assert rep.ranking == ("PE", "SE")
    assert qa_sensitivity(m, QaWeights({})).most_sensitive is None


@pytest.mark.parametrize("devs", [[], [0], [1.5], [-0.1]])
def test_invalid_deviation(devs):
    with pytest.raises(InvalidDeviation):
        qa_sensitivity(TOY, QaWeights({"PE": 1}), devs)


def test_air_set_of_size_one():
    recs, cgs, ccg = _population([("RE",), ("RE",), ("PE",), ("SE",)])
    sets = find_air_sets(recs, cgs, ccg, TOY)
    assert [(a.removed_asr_ids, a.sensitive_qa) for a in sets] == [(("R1",), "RE")]
    assert sets[0].before.diff(sets[0].after) == [("G1", "X", "Y")]


def test_air_set_of_size_three():
    recs, cgs, ccg = _population([("RE",)] * 5 + [("PE",)] * 2)
    sets = find_air_sets(recs, cgs, ccg, TOY)
    assert [a.removed_asr_ids for a in sets] == [("R1", "R2", "R3")]
    assert air_size_histogram(sets) == {3: 1}


def test_removal_orders():
    recs, cgs, ccg = _population([("RE", "SE"), ("RE",), ("PE",), ("SE",)])
    by_qa = find_air_sets(recs, cgs, ccg, TOY, removal_order="by-sensitive-qa", qa="RE")
    assert by_qa[0].removed_asr_ids == ("R2",)
    assert find_air_sets(recs, cgs, ccg, TOY, qa="RE")[0].removed_asr_ids == ("R1",)
    with pytest.raises(ValueError):
        find_air_sets(recs, cgs, ccg, TOY, removal_order="random", qa="RE")
    with pytest.raises(NoAsrsForQa):
        find_air_sets(recs, cgs, ccg, TOY, qa="CE")


def test_air_scan_is_deterministic():
    recs, cgs, ccg = _population([("RE",), ("PE", "RE"), ("RE",), ("PE",), ("SE",), ("RE",)])
    runs = [find_air_sets(recs, cgs, ccg, TOY) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


@pytest.mark.parametrize("n, worst", [(1, 0), (2, 1), (100, 4950), (2000, 1999000)])
def test_estimate_exact(n, worst):
    est = estimate_runtime(n)
    assert est.worst_iterations == worst
    assert est.best_iterations == pytest.approx(worst * 0.0225)
    assert est.worst_time == pytest.approx(worst * LATENCY_PRESETS["table"])


@settings(max_examples=200)
@given(st.integers(1, 100000))
def test_worst_case_difference_law(n):
    assert estimate_runtime(n + 1).worst_iterations - estimate_runtime(n).worst_iterations == n


@pytest.mark.parametrize("kw", [{"n": 0}, {"n": 5, "asr_ratio": 0}, {"n": 5, "conditional_ratio": 1.5}, {"n": 5, "per_call_latency": -1}])
def test_estimate_rejects_bad_input(kw):
    with pytest.raises(ValueError):
        estimate_runtime(**kw)


def test_humanize_seconds():
    assert humanize_seconds(12.0) == "12.0 s"
    assert humanize_seconds(90) == "1.5 min"
    assert humanize_seconds(7200) == "2.0 hours"
    assert humanize_seconds(86400 * 14) == "14.0 days"
