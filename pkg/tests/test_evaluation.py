"""Matchers, PR curves, AUC, and max F1 against hand-derived values."""

import numpy as np
import pytest

from m2oie.corpus import AnnotatedSentence, TupleAnnotation
from m2oie.evaluation import (
    GoldTuple,
    PRPoint,
    auc,
    evaluate,
    lexical_match,
    max_f1,
    pr_curve,
    tuple_match_score,
)
from m2oie.tuples import Extraction, Phrase


def ext(sid, conf, pred, a0=None, a1=None, a2=None, a3=None, tokens=None):
    def phrase(indices):
        if indices is None:
            return None
        text = " ".join(tokens[i] for i in indices) if tokens else ""
        return Phrase(list(indices), text)

    return Extraction(sentence_id=sid, predicate=phrase(pred),
                      args=[phrase(a0), phrase(a1), phrase(a2), phrase(a3)],
                      confidence=conf)


TOKENS_A = ["ann", "built", "a", "stone", "tower", "near", "the", "old", "bridge"]
TOKENS_B = ["bob", "sailed", "his", "boat", "across", "calm", "water"]


@pytest.fixture
def gold_corpus():
    return [
        AnnotatedSentence(id="a", tokens=TOKENS_A,
                          tuples=[TupleAnnotation(pred=[1],
                                                  args=[[0], [2, 3, 4], None, None])]),
        AnnotatedSentence(id="b", tokens=TOKENS_B,
                          tuples=[TupleAnnotation(pred=[1],
                                                  args=[[0], [2, 3], None, None])]),
    ]


@pytest.fixture
def fixture_extractions():
    # e1: exact match of gold a; e2: right tuple with an overlong ARG1;
    # e3: right predicate, wrong ARG0, missing ARG1.
    return [
        ext("a", 0.9, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A),
        ext("b", 0.6, [1], a0=[0], a1=[2, 3, 4, 5], tokens=TOKENS_B),
        ext("a", 0.3, [1], a0=[7, 8], tokens=TOKENS_A),
    ]


def gold_of(sentence):
    t = sentence.tuples[0]
    return GoldTuple(sentence.id, list(t.pred),
                     [list(a) if a else None for a in t.args])


class TestLexicalMatch:
    def test_identical_extraction_matches(self, gold_corpus):
        e = ext("a", 1.0, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A)
        assert lexical_match(e, gold_of(gold_corpus[0]), TOKENS_A)

    def test_missing_slot_fails(self, gold_corpus):
        e = ext("a", 1.0, [1], a0=[0], tokens=TOKENS_A)
        assert not lexical_match(e, gold_of(gold_corpus[0]), TOKENS_A)

    def test_extra_words_still_match(self, gold_corpus):
        # overlap rule tolerates long extractions
        e = ext("b", 1.0, [1], a0=[0], a1=[2, 3, 4, 5, 6], tokens=TOKENS_B)
        assert lexical_match(e, gold_of(gold_corpus[1]), TOKENS_B)

    def test_half_coverage_boundary(self, gold_corpus):
        # one of two gold ARG1 tokens present: exactly 50%, still a match
        e = ext("b", 1.0, [1], a0=[0], a1=[3], tokens=TOKENS_B)
        assert lexical_match(e, gold_of(gold_corpus[1]), TOKENS_B)


class TestTupleMatch:
    def test_exact_match_full_credit(self, gold_corpus):
        e = ext("a", 1.0, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A)
        assert tuple_match_score(e, gold_of(gold_corpus[0])) == (1.0, 1.0)

    def test_disjoint_predicates_gate_to_zero(self, gold_corpus):
        e = ext("a", 1.0, [5], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A)
        assert tuple_match_score(e, gold_of(gold_corpus[0])) == (0.0, 0.0)

    def test_doubled_slots_halve_precision(self):
        gold = GoldTuple("s", [2], [[0], [4], None, None])
        e = ext("s", 1.0, [2, 3], a0=[0, 1], a1=[4, 5],
                tokens=["t0", "t1", "t2", "t3", "t4", "t5"])
        p, r = tuple_match_score(e, gold)
        assert p == pytest.approx(0.5)
        assert r == pytest.approx(1.0)

    def test_symmetry_under_swap(self):
        gold = GoldTuple("s", [1], [[0], [2, 3], None, None])
        e = ext("s", 1.0, [1], a0=[0], a1=[2, 3, 4, 5],
                tokens=["t0", "t1", "t2", "t3", "t4", "t5"])
        p, r = tuple_match_score(e, gold)
        swapped_gold = GoldTuple("s", e.predicate.indices,
                                 [ph.indices if ph else None for ph in e.args])
        swapped_e = ext("s", 1.0, gold.pred, a0=gold.args[0], a1=gold.args[1],
                        tokens=["t0", "t1", "t2", "t3", "t4", "t5"])
        p2, r2 = tuple_match_score(swapped_e, swapped_gold)
        assert (p, r) == (r2, p2)


class TestPRCurve:
    def test_perfect_system_single_point(self, gold_corpus):
        preds = [ext("a", 1.0, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A),
                 ext("b", 1.0, [1], a0=[0], a1=[2, 3], tokens=TOKENS_B)]
        points = pr_curve(preds, gold_corpus, "tuple")
        assert len(points) == 1
        assert points[0].precision == pytest.approx(1.0)
        assert points[0].recall == pytest.approx(1.0)

    def test_zero_predictions_empty_curve(self, gold_corpus):
        assert pr_curve([], gold_corpus, "tuple") == []

    def test_no_golds_raises(self, fixture_extractions):
        empty = [AnnotatedSentence(id="a", tokens=["x"], tuples=[])]
        with pytest.raises(ValueError, match="gold"):
            pr_curve(fixture_extractions, empty, "tuple")

    def test_hand_derived_tuple_points(self, gold_corpus, fixture_extractions):
        points = pr_curve(fixture_extractions, gold_corpus, "tuple")
        assert [round(pt.threshold, 6) for pt in points] == [0.9, 0.6, 0.3]
        assert points[0].precision == pytest.approx(1.0, abs=1e-12)
        assert points[0].recall == pytest.approx(0.5, abs=1e-12)
        assert points[1].precision == pytest.approx(5 / 6, abs=1e-12)
        assert points[1].recall == pytest.approx(1.0, abs=1e-12)
        assert points[2].precision == pytest.approx(5 / 9, abs=1e-12)
        assert points[2].recall == pytest.approx(1.0, abs=1e-12)
        assert auc(points) == pytest.approx(23 / 24, abs=1e-12)
        assert max_f1(points) == pytest.approx(10 / 11, abs=1e-12)

    def test_hand_derived_lexical_points(self, gold_corpus, fixture_extractions):
        points = pr_curve(fixture_extractions, gold_corpus, "lexical")
        assert [(round(pt.precision, 9), round(pt.recall, 9)) for pt in points] == [
            (1.0, 0.5), (1.0, 1.0), (round(2 / 3, 9), 1.0)]
        assert max_f1(points) == pytest.approx(1.0)

    def test_lexical_f1_at_least_tuple_f1_on_long_extractions(
            self, gold_corpus, fixture_extractions):
        lex = max_f1(pr_curve(fixture_extractions, gold_corpus, "lexical"))
        tup = max_f1(pr_curve(fixture_extractions, gold_corpus, "tuple"))
        assert lex >= tup

    def test_recall_monotone_and_bounded(self, gold_corpus, fixture_extractions):
        points = pr_curve(fixture_extractions, gold_corpus, "tuple")
        recalls = [pt.recall for pt in points]  # thresholds descending
        assert recalls == sorted(recalls)
        for pt in points:
            assert 0.0 <= pt.precision <= 1.0
            assert 0.0 <= pt.recall <= 1.0

    def test_confidence_scaling_leaves_points_unchanged(
            self, gold_corpus, fixture_extractions):
        base = pr_curve(fixture_extractions, gold_corpus, "tuple")
        scaled_preds = [
            Extraction(e.sentence_id, e.predicate, e.args, e.confidence * 2.0)
            for e in fixture_extractions
        ]
        scaled = pr_curve(scaled_preds, gold_corpus, "tuple")
        assert [(pt.precision, pt.recall) for pt in base] == \
            [(pt.precision, pt.recall) for pt in scaled]

    def test_each_gold_credited_at_most_once(self, gold_corpus):
        # two identical predictions compete for one gold
        preds = [ext("a", 0.9, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A),
                 ext("a", 0.8, [1], a0=[0], a1=[2, 3, 4], tokens=TOKENS_A)]
        points = pr_curve(preds, gold_corpus, "tuple")
        final = points[-1]
        assert final.recall == pytest.approx(0.5)      # one of two golds found
        assert final.precision == pytest.approx(0.5)   # second copy uncredited

    def test_unknown_matcher_name(self, gold_corpus, fixture_extractions):
        with pytest.raises(ValueError, match="matcher"):
            pr_curve(fixture_extractions, gold_corpus, "fuzzy")


class TestAggregates:
    def test_auc_hand_trapezoid(self):
        points = [PRPoint(3.0, 1.0, 0.0), PRPoint(2.0, 1.0, 0.5), PRPoint(1.0, 0.5, 1.0)]
        assert auc(points) == pytest.approx(0.875, abs=1e-12)

    def test_single_point_f1(self):
        points = [PRPoint(1.0, 1.0, 0.5)]
        assert max_f1(points) == pytest.approx(2 / 3, abs=1e-12)
        assert auc(points) == pytest.approx(0.5, abs=1e-12)

    def test_auc_always_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            recalls = np.sort(rng.uniform(0, 1, size=n))
            pts = [PRPoint(float(n - i), float(rng.uniform(0, 1)), float(r))
                   for i, r in enumerate(recalls)]
            assert 0.0 <= auc(pts) <= 1.0

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            auc([])
        with pytest.raises(ValueError):
            max_f1([])


def test_evaluate_report_fields(gold_corpus, fixture_extractions):
    report = evaluate(fixture_extractions, gold_corpus, "tuple")
    assert report["auc"] == pytest.approx(23 / 24, abs=1e-12)
    assert report["max_f1"] == pytest.approx(10 / 11, abs=1e-12)
    assert report["best_threshold"] == pytest.approx(0.6)
    assert report["precision_at_best"] == pytest.approx(5 / 6)
    assert report["recall_at_best"] == pytest.approx(1.0)
    assert report["num_predictions"] == 3
    assert report["num_golds"] == 2
    assert len(report["points"]) == 3


def test_evaluate_empty_predictions(gold_corpus):
    report = evaluate([], gold_corpus, "lexical")
    assert report["max_f1"] == 0.0
    assert report["auc"] == 0.0
