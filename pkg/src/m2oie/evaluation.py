"""Scoring extractions against gold tuples.

Two matching styles are provided.  The lexical matcher is lenient: a
prediction matches when, for the predicate and every gold-present slot,
at least half of the gold tokens appear among the predicted slot's
words.  The tuple matcher is stricter: it trades token-level credit per
slot, so overlong extractions lose precision credit.

The precision-recall curve pairs predictions with golds once per
sentence (greedy, highest match credit first, each gold consumed once)
and then sweeps every distinct confidence cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import AnnotatedSentence
from .tuples import NUM_ARG_SLOTS, Extraction

MatchCredit = tuple[float, float]


@dataclass
class GoldTuple:
    sentence_id: str
    pred: list[int]
    args: list[list[int] | None]


@dataclass
class PRPoint:
    threshold: float
    precision: float
    recall: float


def lexical_match(extraction: Extraction, gold: GoldTuple,
                  tokens: Sequence[str]) -> bool:
    """Word-overlap match: every gold slot must be at least half covered."""
    def words(indices):
        return {tokens[i] for i in indices}

    pairs = [(extraction.predicate.indices, gold.pred)]
    for slot in range(NUM_ARG_SLOTS):
        if gold.args[slot] is None:
            continue
        phrase = extraction.args[slot]
        pairs.append((phrase.indices if phrase else [], gold.args[slot]))
    for pred_indices, gold_indices in pairs:
        gold_words = words(gold_indices)
        if len(gold_words & words(pred_indices)) < 0.5 * len(gold_words):
            return False
    return True


def tuple_match_score(extraction: Extraction, gold: GoldTuple) -> MatchCredit:
    """Token-credit match: (precision_credit, recall_credit), each in [0, 1].

    Slots trade token-level overlap pooled over the predicate and all
    four argument slots.  Predicates that share no token gate the whole
    pair to zero.
    """
    pred_slots = [set(extraction.predicate.indices)]
    gold_slots = [set(gold.pred)]
    for slot in range(NUM_ARG_SLOTS):
        phrase = extraction.args[slot]
        pred_slots.append(set(phrase.indices) if phrase else set())
        gold_slots.append(set(gold.args[slot]) if gold.args[slot] is not None else set())
    if not pred_slots[0] & gold_slots[0]:
        return 0.0, 0.0
    matched = sum(len(p & g) for p, g in zip(pred_slots, gold_slots))
    pred_total = sum(len(p) for p in pred_slots)
    gold_total = sum(len(g) for g in gold_slots)
    return matched / pred_total, matched / gold_total


def _lexical_credit(extraction, gold, tokens) -> MatchCredit:
    return (1.0, 1.0) if lexical_match(extraction, gold, tokens) else (0.0, 0.0)


def _tuple_credit(extraction, gold, tokens) -> MatchCredit:
    return tuple_match_score(extraction, gold)


MATCHERS: dict[str, Callable[[Extraction, GoldTuple, Sequence[str]], MatchCredit]] = {
    "lexical": _lexical_credit,
    "tuple": _tuple_credit,
}


def _assign(extractions: Sequence[Extraction],
            gold_sentences: Sequence[AnnotatedSentence],
            matcher: Callable[[Extraction, GoldTuple, Sequence[str]], MatchCredit],
            ) -> tuple[list[MatchCredit], int]:
    """Greedy one-to-one credits per prediction, and the total gold count."""
    golds: dict[str, list[GoldTuple]] = {}
    tokens: dict[str, list[str]] = {}
    n_golds = 0
    for s in gold_sentences:
        tokens[s.id] = s.tokens
        golds[s.id] = [GoldTuple(s.id, list(t.pred),
                                 [list(a) if a is not None else None for a in t.args])
                       for t in s.tuples]
        n_golds += len(s.tuples)

    credits: list[MatchCredit] = [(0.0, 0.0)] * len(extractions)
    by_sentence: dict[str, list[int]] = {}
    for i, e in enumerate(extractions):
        by_sentence.setdefault(e.sentence_id, []).append(i)

    for sid, pred_indices in by_sentence.items():
        sentence_golds = golds.get(sid, [])
        if not sentence_golds:
            continue
        candidates = []
        for local_rank, pi in enumerate(pred_indices):
            for gi, gold in enumerate(sentence_golds):
                p, r = matcher(extractions[pi], gold, tokens[sid])
                combined = 2 * p * r / (p + r) if p + r > 0 else 0.0
                if combined > 0:
                    candidates.append((-combined, local_rank, gi, pi, (p, r)))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))
        used_preds: set[int] = set()
        used_golds: set[int] = set()
        for _, _, gi, pi, credit in candidates:
            if pi in used_preds or gi in used_golds:
                continue
            used_preds.add(pi)
            used_golds.add(gi)
            credits[pi] = credit
    return credits, n_golds


def pr_curve(extractions: Sequence[Extraction],
             gold_sentences: Sequence[AnnotatedSentence],
             matcher: str | Callable = "lexical") -> list[PRPoint]:
    """One precision/recall point per distinct confidence cutoff.

    Confidence ties are processed in stable input order; predictions in
    sentences without golds count only against precision.
    """
    if isinstance(matcher, str):
        if matcher not in MATCHERS:
            raise ValueError(f"unknown matcher {matcher!r}; choose from {sorted(MATCHERS)}")
        matcher = MATCHERS[matcher]
    n_golds = sum(len(s.tuples) for s in gold_sentences)
    if n_golds == 0:
        raise ValueError("no gold tuples to score against")
    if not extractions:
        return []

    credits, _ = _assign(extractions, gold_sentences, matcher)
    order = sorted(range(len(extractions)),
                   key=lambda i: (-extractions[i].confidence, i))
    points: list[PRPoint] = []
    p_sum = 0.0
    r_sum = 0.0
    for rank, i in enumerate(order, start=1):
        p_sum += credits[i][0]
        r_sum += credits[i][1]
        threshold = extractions[i].confidence
        last_of_group = (rank == len(order)
                         or extractions[order[rank]].confidence != threshold)
        if last_of_group:
            points.append(PRPoint(threshold=threshold,
                                  precision=p_sum / rank,
                                  recall=r_sum / n_golds))
    return points


def auc(points: Sequence[PRPoint]) -> float:
    """Trapezoidal area over recall, extended to recall zero at the
    precision of the highest-confidence point."""
    if not points:
        raise ValueError("auc needs at least one point")
    area = 0.0
    prev_r, prev_p = 0.0, points[0].precision
    for pt in points:
        area += (pt.recall - prev_r) * (pt.precision + prev_p) / 2.0
        prev_r, prev_p = pt.recall, pt.precision
    return area


def max_f1(points: Sequence[PRPoint]) -> float:
    if not points:
        raise ValueError("max_f1 needs at least one point")
    best = 0.0
    for pt in points:
        if pt.precision + pt.recall > 0:
            best = max(best, 2 * pt.precision * pt.recall / (pt.precision + pt.recall))
    return best


def evaluate(extractions: Sequence[Extraction],
             gold_sentences: Sequence[AnnotatedSentence],
             matcher: str = "lexical") -> dict:
    """Full scoring report: AUC, max F1, and the point list."""
    points = pr_curve(extractions, gold_sentences, matcher)
    report = {
        "matcher": matcher if isinstance(matcher, str) else "custom",
        "num_predictions": len(extractions),
        "num_golds": sum(len(s.tuples) for s in gold_sentences),
    }
    if not points:
        report.update({"auc": 0.0, "max_f1": 0.0, "best_threshold": None,
                       "precision_at_best": 0.0, "recall_at_best": 0.0, "points": []})
        return report
    best = max(points, key=lambda pt: (2 * pt.precision * pt.recall / (pt.precision + pt.recall)
                                       if pt.precision + pt.recall > 0 else 0.0))
    report.update({
        "auc": auc(points),
        "max_f1": max_f1(points),
        "best_threshold": best.threshold,
        "precision_at_best": best.precision,
        "recall_at_best": best.recall,
        "points": [vars(pt).copy() for pt in points],
    })
    return report


def corpus_f1(model, vocab, annotated: Sequence[AnnotatedSentence],
              matcher: str = "tuple") -> float:
    """Extract from every sentence and return the max F1 over cutoffs."""
    from .encoder import Sentence
    from .tuples import extract_sentence

    extractions = []
    for s in annotated:
        sentence = Sentence(tokens=list(s.tokens),
                            token_ids=[vocab.id_of(t) for t in s.tokens],
                            pad_mask=[True] * len(s.tokens))
        extractions.extend(extract_sentence(model, sentence, sentence_id=s.id))
    points = pr_curve(extractions, annotated, matcher)
    return max_f1(points) if points else 0.0
