import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hseqlabel.doc_model import EntitySpan, TokenLabelScheme
from hseqlabel.evaluation import (
    ConfusionCounts,
    evaluate,
    f1_from_counts,
    flatten_metrics,
    micro_f1_positive,
    per_section_entity_f1,
    replication_report,
    section_label_indices,
    span_f1,
)
from hseqlabel.training import build_documents

SCHEME = TokenLabelScheme()


def test_micro_f1_examples():
    assert micro_f1_positive([1, 2, 0], [1, 2, 0], SCHEME) == 1.0
    assert micro_f1_positive([0, 0], [0, 0], SCHEME) == 0.0
    # TP=2, FP=1, FN=1
    pred, gold = [1, 2, 3, 0], [1, 2, 0, 4]
    assert micro_f1_positive(pred, gold, SCHEME) == pytest.approx(2 / 3)
    assert f1_from_counts(2, 1, 1) == pytest.approx((2 / 3, 2 / 3, 2 / 3))


def test_micro_f1_length_mismatch():
    with pytest.raises(ValueError):
        micro_f1_positive([1], [1, 2], SCHEME)


def test_span_f1_examples():
    gold = [EntitySpan("name", 0, 4), EntitySpan("city", 5, 9), EntitySpan("state", 10, 12)]
    assert span_f1(gold, gold)[2] == 1.0
    p, r, f = span_f1([EntitySpan("name", 0, 5)] + gold[1:], gold)
    assert (p, r) == (2 / 3, 2 / 3)
    assert span_f1([], gold) == (0.0, 0.0, 0.0)


def test_per_section_examples():
    idx = section_label_indices(SCHEME)
    work = idx["work"][0]
    contact = idx["contact"][0]
    counts = ConfusionCounts.zeros(SCHEME.size)
    counts.add([work, work, 0], [work, work, contact])
    f = per_section_entity_f1(counts, SCHEME)
    assert f["work"] == 1.0 and f["contact"] < 1.0 and f["education"] == 0.0
    assert counts.totals(idx["education"]) == (0, 0, 0)


@given(st.lists(st.tuples(st.integers(0, SCHEME.size - 1), st.integers(0, SCHEME.size - 1)), max_size=60))
def test_count_identity(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    counts = ConfusionCounts.zeros(SCHEME.size).add(pred, gold)
    idx = section_label_indices(SCHEME)
    assigned = set().union(*map(set, idx.values()))
    rest = [k for k in range(1, SCHEME.size) if k not in assigned]
    parts = [counts.totals(v) for v in idx.values()] + [counts.totals(rest)]
    assert tuple(map(sum, zip(*parts))) == counts.totals()
    tp, fp, fn = counts.totals()
    f = counts.micro_f1()
    assert 0.0 <= f <= 1.0
    if tp + fp + fn:
        assert (f == 0.0) == (tp == 0)


def test_replication_examples():
    assert replication_report([{"f": 0.9}] * 3)["f"]["mean"] == pytest.approx(0.9)
    r = replication_report([{"f": 0.8}, {"f": 1.0}])["f"]
    assert r["mean"] == pytest.approx(0.9) and (r["min"], r["max"]) == (0.8, 1.0)
    assert replication_report([{"f": 0.37}])["f"]["mean"] == 0.37
    with pytest.raises(ValueError):
        replication_report([{"f": 1.0}, {"g": 1.0}])


def test_flatten_metrics():
    assert flatten_metrics({"a": {"b": 1, "c": {"d": 0.5}}, "e": True}) == {"a.b": 1.0, "a.c.d": 0.5}


def test_reorder_invariance(tiny_model, small_corpus):
    docs = build_documents(small_corpus[16:], tiny_model.config)
    a = evaluate(tiny_model, docs)
    b = evaluate(tiny_model, docs[::-1])
    assert a == b
    for level in ("lines", "tokens"):
        assert 0.0 <= a[level]["micro_f1"] <= 1.0


def test_gold_predictions_score_one(tiny_model, small_corpus, monkeypatch):
    # a model that echoes gold must score 1.0 on both label and span metrics
    from hseqlabel import model as model_mod
    from hseqlabel.doc_model import ParseResult

    docs = build_documents(small_corpus[:4], tiny_model.config)
    gold = {ld.doc.id: ld for ld in docs}

    def echo(model, doc, X=None):
        ld = gold[doc.id]
        return ParseResult(doc.id, tuple(ld.line_labels), tuple(ld.token_labels), ld.annotations)

    monkeypatch.setattr(model_mod, "predict", echo)
    r = evaluate(tiny_model, docs)
    assert r["lines"]["micro_f1"] == 1.0 and r["lines"]["span_f1"] == 1.0
    assert r["tokens"]["micro_f1"] == 1.0 and r["tokens"]["span_f1"] == 1.0
