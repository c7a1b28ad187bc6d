"""Annotated corpora: line format, gold tag conversion, synthetic generation.

A corpus file holds one JSON record per line::

    {"id": "s7-0001", "tokens": ["the", "pilot", ...],
     "tuples": [{"pred": [2], "args": [[0, 1], [3, 4], null, null]}]}

Gold spans are stored as token indices over whitespace tokens, which
keeps annotation alignment exact.  An absent argument slot is ``null``;
an empty index list is invalid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .predicates import ARG_TAGS, PRED_TAGS, TagSequence, tags_from_ids

NUM_ARG_SLOTS = 4


class CorpusError(ValueError):
    """Base class for corpus reading problems."""


class CorpusFormatError(CorpusError):
    """A line is not a well-formed record."""


class CorpusValidationError(CorpusError):
    """A record violates span invariants (bounds, overlap, contiguity)."""


def _check_span(span: Sequence[int], what: str) -> list[int]:
    span = list(span)
    if not span:
        raise CorpusValidationError(f"{what}: empty span (use null for absent slots)")
    if any(not isinstance(i, int) or isinstance(i, bool) for i in span):
        raise CorpusValidationError(f"{what}: indices must be integers, got {span}")
    if any(b != a + 1 for a, b in zip(span, span[1:])):
        raise CorpusValidationError(f"{what}: indices must be consecutive, got {span}")
    if span[0] < 0:
        raise CorpusValidationError(f"{what}: negative index in {span}")
    return span


@dataclass
class TupleAnnotation:
    """One gold extraction: a predicate span plus up to four argument spans."""

    pred: list[int]
    args: list[list[int] | None]

    def __post_init__(self):
        self.pred = _check_span(self.pred, "pred")
        if len(self.args) != NUM_ARG_SLOTS:
            raise CorpusValidationError(
                f"args must list exactly {NUM_ARG_SLOTS} slots, got {len(self.args)}")
        self.args = [None if a is None else _check_span(a, f"arg{i}")
                     for i, a in enumerate(self.args)]
        taken: set[int] = set(self.pred)
        for i, span in enumerate(self.args):
            if span is None:
                continue
            overlap = taken.intersection(span)
            if overlap:
                raise CorpusValidationError(
                    f"arg{i} overlaps another span at tokens {sorted(overlap)}")
            taken.update(span)

    @property
    def max_index(self) -> int:
        spans = [self.pred] + [a for a in self.args if a is not None]
        return max(max(s) for s in spans)

    def to_record(self) -> dict:
        return {"pred": self.pred, "args": [a if a is not None else None for a in self.args]}


@dataclass
class AnnotatedSentence:
    """Tokens plus the gold tuples annotated over them."""

    id: str
    tokens: list[str]
    tuples: list[TupleAnnotation] = field(default_factory=list)

    def __post_init__(self):
        if not self.tokens:
            raise CorpusValidationError(f"{self.id}: sentence has no tokens")
        for t in self.tuples:
            if t.max_index >= len(self.tokens):
                raise CorpusValidationError(
                    f"{self.id}: span index {t.max_index} outside "
                    f"{len(self.tokens)}-token sentence")
        # Predicate spans of different tuples must not collide, otherwise
        # the merged predicate tagging target would be ambiguous.
        seen: set[int] = set()
        for t in self.tuples:
            clash = seen.intersection(t.pred)
            if clash:
                raise CorpusValidationError(
                    f"{self.id}: predicate spans of two tuples overlap at {sorted(clash)}")
            seen.update(t.pred)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def to_record(self) -> dict:
        return {"id": self.id, "tokens": self.tokens,
                "tuples": [t.to_record() for t in self.tuples]}


@dataclass
class CorpusSplit:
    train: list[AnnotatedSentence]
    dev: list[AnnotatedSentence]
    test: list[AnnotatedSentence]

    def __post_init__(self):
        ids = [s.id for part in (self.train, self.dev, self.test) for s in part]
        if len(ids) != len(set(ids)):
            raise CorpusValidationError("corpus splits share sentence ids")


def _sentence_from_record(record: dict) -> AnnotatedSentence:
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not an object")
    missing = {"id", "tokens", "tuples"} - record.keys()
    if missing:
        raise CorpusFormatError(f"record missing fields {sorted(missing)}")
    tuples = [TupleAnnotation(pred=t["pred"], args=t["args"]) for t in record["tuples"]]
    return AnnotatedSentence(id=str(record["id"]), tokens=list(record["tokens"]),
                             tuples=tuples)


def load_corpus(path) -> list[AnnotatedSentence]:
    """Read a corpus file, rejecting malformed or invariant-violating records."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                sentences.append(_sentence_from_record(record))
            except KeyError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: missing field {exc}") from exc
            except CorpusError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
    return sentences


def save_corpus(path, sentences: Sequence[AnnotatedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(s.to_record(), separators=(",", ":")) + "\n")


def tuples_to_tags(sentence: AnnotatedSentence,
                   tup: TupleAnnotation) -> tuple[TagSequence, TagSequence]:
    """Gold BIO tag sequences (predicate, argument) for one tuple."""
    if tup.max_index >= len(sentence.tokens):
        raise CorpusValidationError(
            f"span index {tup.max_index} outside {len(sentence.tokens)}-token sentence")
    length = len(sentence.tokens)
    pred_ids = np.zeros(length, dtype=np.int64)
    pred_ids[tup.pred[0]] = PRED_TAGS.index("P-B")
    for i in tup.pred[1:]:
        pred_ids[i] = PRED_TAGS.index("P-I")
    arg_ids = np.zeros(length, dtype=np.int64)
    for slot, span in enumerate(tup.args):
        if span is None:
            continue
        arg_ids[span[0]] = ARG_TAGS.index(f"A{slot}-B")
        for i in span[1:]:
            arg_ids[i] = ARG_TAGS.index(f"A{slot}-I")
    return tags_from_ids(pred_ids, PRED_TAGS), tags_from_ids(arg_ids, ARG_TAGS)


def merged_predicate_tags(sentence: AnnotatedSentence) -> TagSequence:
    """One predicate tag sequence marking every tuple's predicate span."""
    ids = np.zeros(len(sentence.tokens), dtype=np.int64)
    for tup in sentence.tuples:
        ids[tup.pred[0]] = PRED_TAGS.index("P-B")
        for i in tup.pred[1:]:
            ids[i] = PRED_TAGS.index("P-I")
    return tags_from_ids(ids, PRED_TAGS)


# ---------------------------------------------------------------------------
# Synthetic corpus generation


_DETERMINERS = ["the", "a", "each", "every", "that"]

_ADJECTIVES = [
    "quick", "old", "young", "busy", "careful", "noisy", "quiet", "bright",
    "clever", "tired", "eager", "calm", "brave", "curious", "gentle", "happy",
    "heavy", "light", "modern", "narrow", "patient", "proud", "rusty", "shiny",
    "sturdy", "tall", "tiny", "warm", "wooden", "yellow",
]

_NOUNS = [
    "engineer", "pilot", "teacher", "farmer", "doctor", "painter", "student",
    "writer", "singer", "dancer", "baker", "lawyer", "sailor", "guard", "chef",
    "nurse", "judge", "clerk", "coach", "actor", "robot", "turbine", "engine",
    "bridge", "tunnel", "garden", "market", "castle", "harbor", "village",
    "library", "museum", "factory", "station", "airport", "kitchen", "workshop",
    "orchard", "meadow", "canyon", "ledger", "report", "letter", "parcel",
    "basket", "bottle", "camera", "compass", "lantern", "hammer", "shovel",
    "ticket", "violin", "anchor", "barrel", "cabinet", "mirror", "carpet",
    "statue", "whistle", "telescope", "keyboard", "suitcase", "umbrella",
    "bicycle", "wagon", "crane", "windmill", "lighthouse", "fountain",
]

_VERBS = [
    "repaired", "examined", "painted", "delivered", "carried", "inspected",
    "measured", "cleaned", "moved", "opened", "closed", "lifted", "sold",
    "bought", "borrowed", "returned", "designed", "built", "tested",
    "launched", "watched", "followed", "greeted", "thanked", "visited",
    "praised", "signed", "sealed", "packed", "loaded", "unloaded", "sketched",
    "polished", "weighed", "counted", "photographed", "restored", "guarded",
    "labeled", "shipped",
]

_AUXILIARIES = ["will", "can", "must", "should"]

_PREPOSITIONS = ["in", "near", "behind", "beside", "under", "above", "across",
                 "inside", "outside", "around", "beyond", "along"]

_ADVERBS = ["quickly", "slowly", "carefully", "quietly", "eagerly", "calmly",
            "proudly", "gently", "badly", "neatly", "firmly", "swiftly"]

_CONNECTORS = ["and", "while", "but"]


def grammar_words() -> list[str]:
    """Every surface word the synthetic grammar can emit."""
    return (_DETERMINERS + _ADJECTIVES + _NOUNS + _VERBS + _AUXILIARIES
            + _PREPOSITIONS + _ADVERBS + _CONNECTORS)


def _noun_phrase(rng: np.random.Generator) -> list[str]:
    words = []
    if rng.random() < 0.8:
        words.append(_DETERMINERS[rng.integers(len(_DETERMINERS))])
    for _ in range(int(rng.integers(0, 3))):
        words.append(_ADJECTIVES[rng.integers(len(_ADJECTIVES))])
    words.append(_NOUNS[rng.integers(len(_NOUNS))])
    return words


def _prep_phrase(rng: np.random.Generator) -> list[str]:
    return [_PREPOSITIONS[rng.integers(len(_PREPOSITIONS))]] + _noun_phrase(rng)


def _clause(rng: np.random.Generator, offset: int) -> tuple[list[str], TupleAnnotation]:
    tokens: list[str] = []

    def emit(words: list[str]) -> list[int]:
        start = offset + len(tokens)
        tokens.extend(words)
        return list(range(start, start + len(words)))

    subject = emit(_noun_phrase(rng))
    pred_words = []
    if rng.random() < 0.25:
        pred_words.append(_AUXILIARIES[rng.integers(len(_AUXILIARIES))])
    pred_words.append(_VERBS[rng.integers(len(_VERBS))])
    pred = emit(pred_words)
    obj = emit(_noun_phrase(rng))
    arg2 = emit(_prep_phrase(rng)) if rng.random() < 0.45 else None
    arg3 = None
    if rng.random() < 0.25:
        if rng.random() < 0.6:
            arg3 = emit([_ADVERBS[rng.integers(len(_ADVERBS))]])
        else:
            arg3 = emit(_prep_phrase(rng))
    return tokens, TupleAnnotation(pred=pred, args=[subject, obj, arg2, arg3])


def synth_corpus(seed: int, n_sentences: int) -> list[AnnotatedSentence]:
    """Generate a deterministic template-grammar corpus.

    Sentences carry one to three verb clauses; clause counts are drawn so
    that roughly half of all sentences hold multiple predicates.
    """
    if n_sentences < 1:
        raise ValueError("n_sentences must be at least 1")
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n_sentences):
        n_clauses = int(rng.choice([1, 2, 3], p=[0.5, 0.35, 0.15]))
        tokens: list[str] = []
        tuples: list[TupleAnnotation] = []
        for c in range(n_clauses):
            if c > 0:
                tokens.append(_CONNECTORS[rng.integers(len(_CONNECTORS))])
            clause_tokens, annotation = _clause(rng, offset=len(tokens))
            tokens.extend(clause_tokens)
            tuples.append(annotation)
        sentences.append(AnnotatedSentence(id=f"s{seed}-{i:04d}", tokens=tokens,
                                           tuples=tuples))
    return sentences
