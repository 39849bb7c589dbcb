import json

import pytest
from hypothesis import given, strategies as st

import oracles
from placeorigin import metrics
from placeorigin.errors import InvalidJudgment, MissingJudgment, UndefinedBase

rel_lists = st.lists(st.integers(0, 1), max_size=20)
ks = st.sampled_from([1, 3, 5, 10])


@given(rel_lists, ks)
def test_against_reference(rels, k):
    assert metrics.hr_at_k(rels, k) == oracles.hr(rels, k)
    assert metrics.mrr_at_k(rels, k) == pytest.approx(oracles.mrr(rels, k), abs=1e-12)
    assert metrics.precision_at_k(rels, k) == pytest.approx(oracles.precision(rels, k), abs=1e-12)
    assert metrics.ndcg_at_k(rels, k) == pytest.approx(oracles.ndcg(rels, k), abs=1e-12)


@given(rel_lists, ks)
def test_ordering_invariants(rels, k):
    hr = metrics.hr_at_k(rels, k)
    assert 0 <= metrics.precision_at_k(rels, k) <= hr
    assert 0 <= metrics.mrr_at_k(rels, k) <= hr
    assert 0 <= metrics.ndcg_at_k(rels, k) <= 1 + 1e-12
    assert metrics.average_precision_at_k(rels, k) <= hr


@given(rel_lists, ks, rel_lists)
def test_items_beyond_k_do_not_matter(rels, k, tail):
    head = (rels + [0] * k)[:k]
    for f in (metrics.hr_at_k, metrics.mrr_at_k, metrics.ndcg_at_k, metrics.precision_at_k):
        assert f(head + tail, k) == f(head, k)


def test_known_values():
    assert metrics.mrr_at_k([0, 0, 1], 10) == pytest.approx(1 / 3)
    assert metrics.ndcg_at_k([0, 1], 10) == pytest.approx(1 / 1.5849625007211563)
    assert metrics.precision_at_k([1, 1], 10) == 0.2
    assert metrics.average_precision_at_k([1, 0, 1], 3) == pytest.approx((1 + 2 / 3) / 2)
    assert metrics.map_at_k([[1, 0], [1, 1]], 2) == 0.75
    with pytest.raises(ValueError):
        metrics.hr_at_k([1], 0)


def test_delta_hr():
    assert metrics.delta_hr(0.5, 0.25) == 1.0
    assert metrics.delta_hr(0.2, 0.4) == -0.5
    with pytest.raises(UndefinedBase):
        metrics.delta_hr(0.3, 0.0)
    assert metrics.delta_hr_series({"a": 0.0, "b": 0.5, "c": 0.25}) == {"b/a": None, "c/b": -0.5}


def test_judgment_validation():
    with pytest.raises(InvalidJudgment):
        metrics.RelevanceJudgment("q", "i", geo_vic=1, geo_aus=0)
    with pytest.raises(InvalidJudgment):
        metrics.RelevanceJudgment("q", "i", sem=2)
    with pytest.raises(InvalidJudgment):
        metrics.QueryMeta("q", kg_extracted=False, origin_mentioned=True)
    with pytest.raises(InvalidJudgment):
        metrics.read_judgments(['{"query_id": "q"}'])


def jline(q, i, sem=0, aus=0, vic=0):
    return json.dumps({"query_id": q, "item_id": i, "sem": sem, "geo_aus": aus, "geo_vic": vic})


def test_aggregate_and_subset():
    judgments = metrics.read_judgments([
        jline("q1", "a", 1, 1, 1), jline("q1", "b", 0, 1, 0),
        jline("q2", "c", 0, 0, 0), jline("q2", "d", 1, 1, 0),
    ])
    meta = metrics.read_meta([
        json.dumps({"query_id": "q1", "kg_extracted": True, "origin_mentioned": True}),
        json.dumps({"query_id": "q2", "kg_extracted": True, "origin_mentioned": False}),
        json.dumps({"query_id": "q3", "kg_extracted": False, "origin_mentioned": False}),
    ])
    rankings = {"q1": ["a", "b"], "q2": ["c", "d"]}
    rep = metrics.aggregate(judgments, rankings, meta, k=2)
    assert (rep.n, rep.n_star) == (3, 1)
    assert rep.scores["sem"]["hr"] == pytest.approx(2 / 3)
    assert rep.scores["sem"]["mrr"] == pytest.approx((1 + 0.5 + 0) / 3)
    assert rep.starred["sem"]["hr"] == 1.0
    assert rep.scores["geo_aus"]["map"] == pytest.approx((1.0 + 0.5 + 0) / 3)
    table = metrics.report_table(rep)
    assert table.splitlines()[0].split("\t")[:3] == ["type", "mrr", "ndcg"]
    grid = metrics.relevance_grid(judgments, rankings, 3, "sem")
    assert grid["grid"] == [[1, 0, -1], [0, 1, -1]]


def test_missing_judgment_names_pair():
    with pytest.raises(MissingJudgment) as exc:
        metrics.aggregate({}, {"q1": ["x"]}, {"q1": metrics.QueryMeta("q1", True, True)}, 10)
    assert exc.value.query_id == "q1" and exc.value.item_id == "x"


def test_empty_report():
    rep = metrics.aggregate({}, {}, {}, 10)
    assert rep.n == 0 and rep.scores["sem"]["hr"] == 0.0
    assert metrics.accounting({})["extracted_ratio"] is None
