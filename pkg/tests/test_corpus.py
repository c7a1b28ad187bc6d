"""Corpus format, gold tag conversion, and the synthetic grammar."""

import numpy as np
import pytest

from m2oie.corpus import (
    AnnotatedSentence,
    CorpusFormatError,
    CorpusSplit,
    CorpusValidationError,
    TupleAnnotation,
    grammar_words,
    load_corpus,
    merged_predicate_tags,
    save_corpus,
    synth_corpus,
    tuples_to_tags,
)
from m2oie.tuples import decode_bio


def make_sentence():
    return AnnotatedSentence(
        id="t1", tokens=["the", "dog", "barked", "loudly"],
        tuples=[TupleAnnotation(pred=[2], args=[[0, 1], None, None, [3]])])


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_round_trip_is_byte_identical(tmp_path):
    sentences = synth_corpus(seed=3, n_sentences=25)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    save_corpus(first, sentences)
    save_corpus(second, load_corpus(first))
    assert first.read_bytes() == second.read_bytes()


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "tokens": ["x"], "tuples": []}\nnot json\n')
    with pytest.raises(CorpusFormatError, match=":2:"):
        load_corpus(path)


def test_out_of_bounds_index_is_validation_error(tmp_path):
    path = tmp_path / "oob.jsonl"
    path.write_text('{"id": "a", "tokens": ["x", "y"], "tuples": '
                    '[{"pred": [2], "args": [null, null, null, null]}]}\n')
    with pytest.raises(CorpusValidationError, match=":1:"):
        load_corpus(path)


def test_overlapping_spans_rejected():
    with pytest.raises(CorpusValidationError, match="overlaps"):
        TupleAnnotation(pred=[1, 2], args=[[2, 3], None, None, None])


def test_empty_arg_list_rejected():
    with pytest.raises(CorpusValidationError, match="null"):
        TupleAnnotation(pred=[0], args=[[], None, None, None])


def test_non_contiguous_span_rejected():
    with pytest.raises(CorpusValidationError, match="consecutive"):
        TupleAnnotation(pred=[0, 2], args=[None, None, None, None])


def test_tuples_to_tags_definition():
    s = AnnotatedSentence(id="x", tokens=["a", "b", "c", "d"],
                          tuples=[TupleAnnotation(pred=[2],
                                                  args=[[0, 1], None, None, None])])
    pred, arg = tuples_to_tags(s, s.tuples[0])
    assert pred.tags == ["O", "O", "P-B", "O"]
    assert arg.tags == ["A0-B", "A0-I", "O", "O"]


def test_all_slots_present_gives_four_begin_tags():
    s = AnnotatedSentence(
        id="x", tokens=list("abcdefgh"),
        tuples=[TupleAnnotation(pred=[3], args=[[0, 1], [2], [4, 5], [6, 7]])])
    _, arg = tuples_to_tags(s, s.tuples[0])
    begins = [t for t in arg.tags if t.endswith("-B")]
    assert len(begins) == 4


def test_decode_recovers_argument_spans():
    for sentence in synth_corpus(seed=11, n_sentences=40):
        for tup in sentence.tuples:
            _, arg = tuples_to_tags(sentence, tup)
            decoded = decode_bio(arg)
            expected = {i: span for i, span in enumerate(tup.args) if span is not None}
            assert decoded == expected


def test_merged_predicate_tags_marks_every_tuple():
    sentences = synth_corpus(seed=12, n_sentences=30)
    for s in sentences:
        tags = merged_predicate_tags(s).tags
        for tup in s.tuples:
            assert tags[tup.pred[0]] == "P-B"
            assert all(tags[i] == "P-I" for i in tup.pred[1:])


def test_synth_is_deterministic_per_seed():
    a = synth_corpus(seed=7, n_sentences=30)
    b = synth_corpus(seed=7, n_sentences=30)
    assert [s.to_record() for s in a] == [s.to_record() for s in b]
    c = synth_corpus(seed=8, n_sentences=30)
    assert [s.to_record() for s in a] != [s.to_record() for s in c]


def test_synth_tuples_pass_validation(tmp_path):
    path = tmp_path / "synth.jsonl"
    save_corpus(path, synth_corpus(seed=5, n_sentences=100))
    assert len(load_corpus(path)) == 100


def test_synth_multi_predicate_fraction():
    sentences = synth_corpus(seed=1, n_sentences=1000)
    multi = sum(1 for s in sentences if len(s.tuples) > 1)
    assert 0.3 <= multi / 1000 <= 0.7


def test_synth_vocabulary_is_desk_scale():
    assert 150 <= len(set(grammar_words())) <= 250
    used = {t for s in synth_corpus(seed=2, n_sentences=500) for t in s.tokens}
    assert used <= set(grammar_words())


def test_synth_fits_default_max_len():
    assert max(len(s.tokens) for s in synth_corpus(seed=4, n_sentences=2000)) <= 64


def test_corpus_split_rejects_shared_ids():
    s = make_sentence()
    with pytest.raises(CorpusValidationError, match="share"):
        CorpusSplit(train=[s], dev=[s], test=[])


def test_cross_tuple_predicate_overlap_rejected():
    with pytest.raises(CorpusValidationError, match="predicate spans"):
        AnnotatedSentence(
            id="x", tokens=["a", "b", "c"],
            tuples=[TupleAnnotation(pred=[1], args=[None, None, None, None]),
                    TupleAnnotation(pred=[1, 2], args=[None, None, None, None])])
