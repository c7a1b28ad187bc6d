"""Predicate BIO tagging over encoder hidden states, plus span grouping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autograd as ag
from .encoder import init_matrix, init_zeros

PRED_TAGS = ("O", "P-B", "P-I")
ARG_TAGS = ("O", "A0-B", "A0-I", "A1-B", "A1-I", "A2-B", "A2-I", "A3-B", "A3-I")


@dataclass
class TagSequence:
    """Per-token tag ids with the probability rows they were decoded from."""

    tag_ids: np.ndarray
    probs: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        self.tag_ids = np.asarray(self.tag_ids, dtype=np.int64)
        self.probs = np.asarray(self.probs)
        if self.probs.shape != (len(self.tag_ids), len(self.labels)):
            raise ValueError(
                f"probs shape {self.probs.shape} does not match "
                f"{len(self.tag_ids)} tags over {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.tag_ids)

    @property
    def tags(self) -> list[str]:
        return [self.labels[i] for i in self.tag_ids]


def tags_from_ids(tag_ids: Sequence[int], labels: tuple[str, ...]) -> TagSequence:
    """A gold tag sequence; probabilities are the one-hot encoding."""
    ids = np.asarray(tag_ids, dtype=np.int64)
    probs = np.zeros((len(ids), len(labels)))
    probs[np.arange(len(ids)), ids] = 1.0
    return TagSequence(ids, probs, labels)


@dataclass
class PredicateSpan:
    """A maximal run of predicate-tagged tokens."""

    indices: list[int]

    def __post_init__(self):
        if not self.indices:
            raise ValueError("predicate span is empty")
        for a, b in zip(self.indices, self.indices[1:]):
            if b != a + 1:
                raise ValueError(f"predicate span indices not consecutive: {self.indices}")

    @property
    def begin(self) -> int:
        return self.indices[0]

    def __len__(self) -> int:
        return len(self.indices)


class PredicateTagger:
    """One hidden layer with ReLU, then a 3-way tag projection."""

    def __init__(self, hidden_dim: int, dropout: float, rng: np.random.Generator):
        self.dropout = dropout
        self.w1 = init_matrix(rng, hidden_dim, hidden_dim)
        self.b1 = init_zeros(hidden_dim)
        self.w2 = init_matrix(rng, hidden_dim, len(PRED_TAGS))
        self.b2 = init_zeros(len(PRED_TAGS))

    def parameters(self) -> dict[str, ag.Tensor]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def logits(self, hidden: ag.Tensor, mode: str = "eval",
               rng: np.random.Generator | None = None) -> ag.Tensor:
        x = ag.relu(ag.add(ag.matmul(hidden, self.w1), self.b1))
        if mode == "train" and self.dropout > 0:
            x = ag.dropout(x, self.dropout, rng)
        return ag.add(ag.matmul(x, self.w2), self.b2)


def decode_logits(logits: ag.Tensor, labels: tuple[str, ...]) -> TagSequence:
    """Softmax probabilities and argmax tags for a logits matrix."""
    probs = ag.softmax_rows(logits).data
    return TagSequence(probs.argmax(axis=1), probs, labels)


def tag_predicates(tagger: PredicateTagger, hidden: ag.Tensor) -> TagSequence:
    return decode_logits(tagger.logits(hidden), PRED_TAGS)


def group_predicates(tags: TagSequence | Sequence[str]) -> list[PredicateSpan]:
    """Group predicate tags into spans.

    A B starts a span; an I extends the running span, or starts a new one
    when it has no preceding B/I (orphan repair keeps the token rather
    than dropping it).
    """
    names = tags.tags if isinstance(tags, TagSequence) else list(tags)
    spans: list[list[int]] = []
    open_span = False
    for i, tag in enumerate(names):
        if tag == "P-B":
            spans.append([i])
            open_span = True
        elif tag == "P-I":
            if open_span and spans[-1][-1] == i - 1:
                spans[-1].append(i)
            else:
                spans.append([i])
                open_span = True
        else:
            open_span = False
    return [PredicateSpan(s) for s in spans]


def predicate_loss(logits: ag.Tensor, gold: TagSequence,
                   mask: Sequence[bool]) -> ag.Tensor:
    return ag.cross_entropy(logits, gold.tag_ids, mask)
