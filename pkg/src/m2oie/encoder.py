"""Whitespace tokenization and a small trainable transformer encoder.

The encoder maps a token sequence to contextual hidden states, one row
per token.  It is intentionally tiny (learned absolute positions, a few
post-norm self-attention layers) so that it can overfit a synthetic
corpus on a CPU in minutes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autograd as ag

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Scores at padded key positions get this additive penalty before softmax,
# which underflows to zero attention weight without producing NaN.
_MASK_PENALTY = -1e9


class Vocabulary:
    """Immutable token-to-id mapping with reserved padding and unknown ids."""

    def __init__(self, words: Sequence[str]):
        self._tokens = [PAD_TOKEN, UNK_TOKEN]
        seen = {PAD_TOKEN, UNK_TOKEN}
        for w in words:
            if w not in seen:
                seen.add(w)
                self._tokens.append(w)
        self._ids = {t: i for i, t in enumerate(self._tokens)}

    @classmethod
    def from_corpus(cls, token_lists: Sequence[Sequence[str]]) -> "Vocabulary":
        return cls([t for tokens in token_lists for t in tokens])

    @property
    def pad_id(self) -> int:
        return self._ids[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._ids[UNK_TOKEN]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens


@dataclass
class Sentence:
    """A tokenized input: surface tokens, ids, and a real-vs-pad mask."""

    tokens: list[str]
    token_ids: list[int]
    pad_mask: list[bool]

    def __post_init__(self):
        if not (len(self.tokens) == len(self.token_ids) == len(self.pad_mask)):
            raise ValueError("sentence fields must have equal length")
        if not any(self.pad_mask):
            raise ValueError("sentence has no unmasked positions")

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def real_length(self) -> int:
        return sum(self.pad_mask)

    def padded(self, length: int, pad_id: int = 0) -> "Sentence":
        """A copy padded with mask-off positions up to ``length``."""
        extra = length - len(self)
        if extra < 0:
            raise ValueError(f"cannot pad length {len(self)} down to {length}")
        return Sentence(self.tokens + [PAD_TOKEN] * extra,
                        self.token_ids + [pad_id] * extra,
                        self.pad_mask + [False] * extra)


def tokenize(text: str, vocab: Vocabulary) -> Sentence:
    """Whitespace-split ``text``; unknown words map to the shared UNK id."""
    tokens = text.split()
    if not tokens:
        raise ValueError("cannot tokenize empty text")
    return Sentence(tokens, [vocab.id_of(t) for t in tokens], [True] * len(tokens))


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


@dataclass
class EncoderConfig:
    vocab_size: int
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 256
    max_len: int = 64
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}")


def init_matrix(rng: np.random.Generator, fan_in: int, fan_out: int,
                gain: float = 1.0) -> ag.Tensor:
    limit = gain * math.sqrt(6.0 / (fan_in + fan_out))
    return ag.tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                     requires_grad=True)


def init_embedding(rng: np.random.Generator, rows: int, dim: int) -> ag.Tensor:
    return ag.tensor(rng.normal(0.0, 0.02, size=(rows, dim)), requires_grad=True)


def init_zeros(n: int) -> ag.Tensor:
    return ag.tensor(np.zeros(n), requires_grad=True)


def init_ones(n: int) -> ag.Tensor:
    return ag.tensor(np.ones(n), requires_grad=True)


class SelfAttentionLayer:
    """Post-norm transformer layer: self-attention then position-wise FFN."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        d, f = cfg.hidden_dim, cfg.ffn_dim
        self.num_heads = cfg.num_heads
        self.head_dim = d // cfg.num_heads
        self.dropout = cfg.dropout
        # projections feeding residual sums start small so that deep
        # post-norm stacks train stably at desk-scale learning rates
        residual_gain = 1.0 / math.sqrt(2.0 * cfg.num_layers)
        self.wq = init_matrix(rng, d, d)
        self.bq = init_zeros(d)
        self.wk = init_matrix(rng, d, d)
        self.bk = init_zeros(d)
        self.wv = init_matrix(rng, d, d)
        self.bv = init_zeros(d)
        self.wo = init_matrix(rng, d, d, gain=residual_gain)
        self.bo = init_zeros(d)
        self.ffn_w1 = init_matrix(rng, d, f)
        self.ffn_b1 = init_zeros(f)
        self.ffn_w2 = init_matrix(rng, f, d, gain=residual_gain)
        self.ffn_b2 = init_zeros(d)
        self.ln1_gain = init_ones(d)
        self.ln1_bias = init_zeros(d)
        self.ln2_gain = init_ones(d)
        self.ln2_bias = init_zeros(d)

    def parameters(self) -> dict[str, ag.Tensor]:
        return {
            "wq": self.wq, "bq": self.bq, "wk": self.wk, "bk": self.bk,
            "wv": self.wv, "bv": self.bv, "wo": self.wo, "bo": self.bo,
            "ffn_w1": self.ffn_w1, "ffn_b1": self.ffn_b1,
            "ffn_w2": self.ffn_w2, "ffn_b2": self.ffn_b2,
            "ln1_gain": self.ln1_gain, "ln1_bias": self.ln1_bias,
            "ln2_gain": self.ln2_gain, "ln2_bias": self.ln2_bias,
        }

    def forward(self, x: ag.Tensor, key_penalty: np.ndarray, training: bool,
                rng: np.random.Generator | None) -> ag.Tensor:
        q = ag.add(ag.matmul(x, self.wq), self.bq)
        k = ag.add(ag.matmul(x, self.wk), self.bk)
        v = ag.add(ag.matmul(x, self.wv), self.bv)
        mixed = ag.multi_head_attention(q, k, v, self.num_heads, penalty=key_penalty)
        attended = ag.add(ag.matmul(mixed, self.wo), self.bo)
        if training and self.dropout > 0:
            attended = ag.dropout(attended, self.dropout, rng)
        x = ag.layer_norm(ag.add(x, attended), self.ln1_gain, self.ln1_bias)
        inner = ag.relu(ag.add(ag.matmul(x, self.ffn_w1), self.ffn_b1))
        ffn = ag.add(ag.matmul(inner, self.ffn_w2), self.ffn_b2)
        if training and self.dropout > 0:
            ffn = ag.dropout(ffn, self.dropout, rng)
        return ag.layer_norm(ag.add(x, ffn), self.ln2_gain, self.ln2_bias)


class Encoder:
    """Token + position embeddings followed by stacked self-attention layers."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.tok_emb = init_embedding(rng, cfg.vocab_size, cfg.hidden_dim)
        self.pos_emb = init_embedding(rng, cfg.max_len, cfg.hidden_dim)
        self.ln_emb_gain = init_ones(cfg.hidden_dim)
        self.ln_emb_bias = init_zeros(cfg.hidden_dim)
        self.layers = [SelfAttentionLayer(cfg, rng) for _ in range(cfg.num_layers)]

    def parameters(self) -> dict[str, ag.Tensor]:
        params = {
            "tok_emb": self.tok_emb,
            "pos_emb": self.pos_emb,
            "ln_emb_gain": self.ln_emb_gain,
            "ln_emb_bias": self.ln_emb_bias,
        }
        for i, layer in enumerate(self.layers):
            for name, p in layer.parameters().items():
                params[f"layer{i}.{name}"] = p
        return params

    def encode(self, sentence: Sentence, mode: str = "eval",
               rng: np.random.Generator | None = None) -> ag.Tensor:
        """Hidden states for ``sentence``, one row per position.

        Padded positions never influence unmasked outputs: their key
        columns are excluded from every attention softmax.
        """
        length = len(sentence)
        if length > self.cfg.max_len:
            raise ValueError(f"sentence length {length} exceeds max_len {self.cfg.max_len}")
        if max(sentence.token_ids) >= self.cfg.vocab_size:
            raise ValueError("token id outside vocabulary")
        training = mode == "train"
        if training and rng is None:
            raise ValueError("train mode needs a random generator for dropout")

        tok = ag.gather_rows(self.tok_emb, sentence.token_ids)
        pos = ag.gather_rows(self.pos_emb, list(range(length)))
        x = ag.layer_norm(ag.add(tok, pos), self.ln_emb_gain, self.ln_emb_bias)
        if training and self.cfg.dropout > 0:
            x = ag.dropout(x, self.cfg.dropout, rng)

        penalty = np.where(np.asarray(sentence.pad_mask), 0.0, _MASK_PENALTY)
        key_penalty = np.broadcast_to(penalty, (length, length))
        for layer in self.layers:
            x = layer.forward(x, key_penalty, training, rng)
        return x
