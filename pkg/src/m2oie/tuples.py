"""Decoding tag sequences into scored extractions.

The record format for extraction files is one tab-separated line per
tuple: sentence id, confidence (six decimal places), then text and
comma-joined token indices for the predicate and each of the four
argument slots (empty fields for absent slots).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .encoder import Sentence
from .predicates import ARG_TAGS, PRED_TAGS, PredicateSpan, TagSequence, group_predicates

NUM_ARG_SLOTS = 4

_ARG_B_INDEX = {slot: ARG_TAGS.index(f"A{slot}-B") for slot in range(NUM_ARG_SLOTS)}
_PRED_B_INDEX = PRED_TAGS.index("P-B")


@dataclass
class Phrase:
    """A token index span together with its surface text."""

    indices: list[int]
    text: str


@dataclass
class Extraction:
    """One n-ary tuple: predicate, up to four argument slots, confidence."""

    sentence_id: str
    predicate: Phrase
    args: list[Phrase | None]
    confidence: float

    def __post_init__(self):
        if not self.predicate.indices:
            raise ValueError("extraction predicate is empty")
        if len(self.args) != NUM_ARG_SLOTS:
            raise ValueError(f"extraction must carry {NUM_ARG_SLOTS} argument slots")
        taken = set(self.predicate.indices)
        for slot, phrase in enumerate(self.args):
            if phrase is None:
                continue
            overlap = taken.intersection(phrase.indices)
            if overlap:
                raise ValueError(f"arg{slot} overlaps other spans at {sorted(overlap)}")
            taken.update(phrase.indices)
        if not 0.0 < self.confidence <= 5.0:
            raise ValueError(f"confidence {self.confidence} outside (0, 5]")


def decode_bio(tags: TagSequence) -> dict[int, list[int]]:
    """Decode argument tags into at most one span per slot.

    Maximal B(+I) runs become candidate spans; an orphan I starts a new
    run.  When a slot decodes to several runs, the one whose first token
    has the highest Beginning-tag probability wins.
    """
    runs: dict[int, list[list[int]]] = {slot: [] for slot in range(NUM_ARG_SLOTS)}
    current_slot: int | None = None
    for i, name in enumerate(tags.tags):
        if name == "O":
            current_slot = None
            continue
        slot = int(name[1])
        begins = name.endswith("-B")
        if not begins and current_slot == slot and runs[slot][-1][-1] == i - 1:
            runs[slot][-1].append(i)
        else:
            runs[slot].append([i])
        current_slot = slot

    decoded: dict[int, list[int]] = {}
    for slot, candidates in runs.items():
        if not candidates:
            continue
        decoded[slot] = max(candidates,
                            key=lambda span: tags.probs[span[0], _ARG_B_INDEX[slot]])
    return decoded


def confidence(pred_tags: TagSequence, arg_tags: TagSequence,
               pred_span: Sequence[int],
               arg_spans: dict[int, list[int]]) -> float:
    """Beginning-tag probability of the predicate plus each present slot."""
    score = float(pred_tags.probs[pred_span[0], _PRED_B_INDEX])
    for slot, span in arg_spans.items():
        score += float(arg_tags.probs[span[0], _ARG_B_INDEX[slot]])
    return score


def _trim_overlap(spans: dict[int, list[int]], pred_span: Sequence[int]) -> dict[int, list[int]]:
    # Argument tokens falling inside the predicate span are dropped;
    # slots left empty become absent.
    blocked = set(pred_span)
    trimmed = {}
    for slot, span in spans.items():
        kept = [i for i in span if i not in blocked]
        if kept:
            trimmed[slot] = kept
    return trimmed


def _phrase(tokens: Sequence[str], indices: Sequence[int]) -> Phrase:
    return Phrase(indices=list(indices), text=" ".join(tokens[i] for i in indices))


def assemble_extraction(sentence: Sentence, sentence_id: str,
                        pred_tags: TagSequence, arg_tags: TagSequence,
                        span: PredicateSpan) -> Extraction:
    """Decode one predicate's argument tags and attach the confidence score."""
    arg_spans = _trim_overlap(decode_bio(arg_tags), span.indices)
    slots: list[Phrase | None] = [
        _phrase(sentence.tokens, arg_spans[slot]) if slot in arg_spans else None
        for slot in range(NUM_ARG_SLOTS)
    ]
    return Extraction(
        sentence_id=sentence_id,
        predicate=_phrase(sentence.tokens, span.indices),
        args=slots,
        confidence=confidence(pred_tags, arg_tags, span.indices, arg_spans),
    )


def extract_sentence(model, sentence: Sentence,
                     sentence_id: str = "0") -> list[Extraction]:
    """Run the full two-step pipeline on one sentence in eval mode."""
    hidden = model.encode(sentence, "eval")
    pred_tags = model.tag_predicates(hidden)
    names = pred_tags.tags
    visible = [name if real else "O" for name, real in zip(names, sentence.pad_mask)]
    extractions = []
    for span in group_predicates(visible):
        arg_tags = model.tag_arguments(hidden, span)
        extractions.append(
            assemble_extraction(sentence, sentence_id, pred_tags, arg_tags, span))
    return extractions


# ---------------------------------------------------------------------------
# Extraction record files


def _format_indices(indices: Sequence[int]) -> str:
    return ",".join(str(i) for i in indices)


def extraction_to_line(e: Extraction) -> str:
    fields = [e.sentence_id, f"{e.confidence:.6f}",
              e.predicate.text, _format_indices(e.predicate.indices)]
    for phrase in e.args:
        if phrase is None:
            fields.extend(["", ""])
        else:
            fields.extend([phrase.text, _format_indices(phrase.indices)])
    return "\t".join(fields)


def extraction_from_line(line: str) -> Extraction:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4 + 2 * NUM_ARG_SLOTS:
        raise ValueError(f"extraction record has {len(fields)} fields, expected "
                         f"{4 + 2 * NUM_ARG_SLOTS}")
    args: list[Phrase | None] = []
    for slot in range(NUM_ARG_SLOTS):
        text, idx = fields[4 + 2 * slot], fields[5 + 2 * slot]
        args.append(None if idx == "" else Phrase([int(i) for i in idx.split(",")], text))
    return Extraction(
        sentence_id=fields[0],
        predicate=Phrase([int(i) for i in fields[3].split(",")], fields[2]),
        args=args,
        confidence=float(fields[1]),
    )


def write_extractions(path, extractions: Sequence[Extraction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in extractions:
            fh.write(extraction_to_line(e) + "\n")


def read_extractions(path) -> list[Extraction]:
    extractions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                extractions.append(extraction_from_line(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return extractions
