"""Argument tagging conditioned on one predicate span.

For a sentence with hidden states ``H`` and a predicate span, the input
representation concatenates, per token: the token's hidden state, the
mean hidden state over the predicate span (duplicated to every row), and
a learned two-row embedding flagging predicate membership.  A stack of
attention blocks then uses the whole sequence as queries and the
predicate rows as keys/values, and a classifier emits 9-way BIO tags
covering argument slots 0-3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .encoder import init_embedding, init_matrix, init_ones, init_zeros
from .predicates import ARG_TAGS, PredicateSpan, TagSequence, decode_logits


@dataclass
class ArgConfig:
    num_blocks: int = 4
    num_heads: int = 8
    pos_dim: int = 16
    ffn_dim: int | None = None  # defaults to 4x the attention width
    dropout: float = 0.2


@dataclass
class ArgInputs:
    """Fused query representation plus its predicate-row key/value slice."""

    x: ag.Tensor
    keys: ag.Tensor
    values: ag.Tensor
    span: tuple[int, ...]


def build_inputs(hidden: ag.Tensor, span: PredicateSpan,
                 pos_table: ag.Tensor) -> ArgInputs:
    """Concatenate hidden states, duplicated span mean, and membership embedding."""
    length = hidden.shape[0]
    if not span.indices:
        raise ValueError("predicate span is empty")
    if span.indices[-1] >= length:
        raise IndexError(f"span {span.indices} outside sentence of length {length}")
    span_mean = ag.repeat_rows(ag.mean_rows(ag.gather_rows(hidden, span.indices)), length)
    membership = [1 if i in set(span.indices) else 0 for i in range(length)]
    flags = ag.gather_rows(pos_table, membership)
    x = ag.concat_cols(hidden, span_mean, flags)
    keys = ag.gather_rows(x, span.indices)
    return ArgInputs(x=x, keys=keys, values=keys, span=tuple(span.indices))


class AttentionBlock:
    """Cross-attention over predicate rows, then a position-wise FFN.

    Both sublayers carry residual connections and layer normalization.
    The key/value side is re-sliced from the block's own input, so
    stacked blocks condition on progressively refined predicate rows.
    """

    def __init__(self, attn_dim: int, cfg: ArgConfig, rng: np.random.Generator):
        if attn_dim % cfg.num_heads != 0:
            raise ValueError(
                f"attention width {attn_dim} not divisible by {cfg.num_heads} heads")
        self.num_heads = cfg.num_heads
        self.head_dim = attn_dim // cfg.num_heads
        self.dropout = cfg.dropout
        ffn_dim = cfg.ffn_dim or 2 * attn_dim
        residual_gain = 1.0 / math.sqrt(2.0 * cfg.num_blocks)
        self.wq = init_matrix(rng, attn_dim, attn_dim)
        self.bq = init_zeros(attn_dim)
        self.wk = init_matrix(rng, attn_dim, attn_dim)
        self.bk = init_zeros(attn_dim)
        self.wv = init_matrix(rng, attn_dim, attn_dim)
        self.bv = init_zeros(attn_dim)
        self.wo = init_matrix(rng, attn_dim, attn_dim, gain=residual_gain)
        self.bo = init_zeros(attn_dim)
        self.ffn_w1 = init_matrix(rng, attn_dim, ffn_dim)
        self.ffn_b1 = init_zeros(ffn_dim)
        self.ffn_w2 = init_matrix(rng, ffn_dim, attn_dim, gain=residual_gain)
        self.ffn_b2 = init_zeros(attn_dim)
        self.ln1_gain = init_ones(attn_dim)
        self.ln1_bias = init_zeros(attn_dim)
        self.ln2_gain = init_ones(attn_dim)
        self.ln2_bias = init_zeros(attn_dim)

    def parameters(self) -> dict[str, ag.Tensor]:
        return {
            "wq": self.wq, "bq": self.bq, "wk": self.wk, "bk": self.bk,
            "wv": self.wv, "bv": self.bv, "wo": self.wo, "bo": self.bo,
            "ffn_w1": self.ffn_w1, "ffn_b1": self.ffn_b1,
            "ffn_w2": self.ffn_w2, "ffn_b2": self.ffn_b2,
            "ln1_gain": self.ln1_gain, "ln1_bias": self.ln1_bias,
            "ln2_gain": self.ln2_gain, "ln2_bias": self.ln2_bias,
        }

    def forward(self, x: ag.Tensor, span: tuple[int, ...], training: bool = False,
                rng: np.random.Generator | None = None,
                return_attn: bool = False):
        kv = ag.gather_rows(x, list(span))
        q = ag.add(ag.matmul(x, self.wq), self.bq)
        k = ag.add(ag.matmul(kv, self.wk), self.bk)
        v = ag.add(ag.matmul(kv, self.wv), self.bv)
        mixed, attn_weights = ag.multi_head_attention(q, k, v, self.num_heads,
                                                      return_weights=True)
        attended = ag.add(ag.matmul(mixed, self.wo), self.bo)
        if training and self.dropout > 0:
            attended = ag.dropout(attended, self.dropout, rng)
        x = ag.layer_norm(ag.add(x, attended), self.ln1_gain, self.ln1_bias)
        inner = ag.relu(ag.add(ag.matmul(x, self.ffn_w1), self.ffn_b1))
        ffn = ag.add(ag.matmul(inner, self.ffn_w2), self.ffn_b2)
        if training and self.dropout > 0:
            ffn = ag.dropout(ffn, self.dropout, rng)
        out = ag.layer_norm(ag.add(x, ffn), self.ln2_gain, self.ln2_bias)
        if return_attn:
            return out, [w for w in attn_weights]  # one (l, p) matrix per head
        return out


class ArgumentExtractor:
    """Attention-block stack plus the 9-way argument classifier."""

    def __init__(self, hidden_dim: int, cfg: ArgConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.attn_dim = 2 * hidden_dim + cfg.pos_dim
        self.pos_table = init_embedding(rng, 2, cfg.pos_dim)
        self.blocks = [AttentionBlock(self.attn_dim, cfg, rng)
                       for _ in range(cfg.num_blocks)]
        self.cls_w1 = init_matrix(rng, self.attn_dim, self.attn_dim)
        self.cls_b1 = init_zeros(self.attn_dim)
        self.cls_w2 = init_matrix(rng, self.attn_dim, len(ARG_TAGS))
        self.cls_b2 = init_zeros(len(ARG_TAGS))

    def parameters(self) -> dict[str, ag.Tensor]:
        params = {"pos_table": self.pos_table}
        for i, block in enumerate(self.blocks):
            for name, p in block.parameters().items():
                params[f"block{i}.{name}"] = p
        params.update({"cls_w1": self.cls_w1, "cls_b1": self.cls_b1,
                       "cls_w2": self.cls_w2, "cls_b2": self.cls_b2})
        return params

    def logits(self, hidden: ag.Tensor, span: PredicateSpan, mode: str = "eval",
               rng: np.random.Generator | None = None) -> ag.Tensor:
        training = mode == "train"
        if training and rng is None:
            raise ValueError("train mode needs a random generator for dropout")
        inputs = build_inputs(hidden, span, self.pos_table)
        x = inputs.x
        for block in self.blocks:
            x = block.forward(x, inputs.span, training, rng)
        x = ag.relu(ag.add(ag.matmul(x, self.cls_w1), self.cls_b1))
        if training and self.cfg.dropout > 0:
            x = ag.dropout(x, self.cfg.dropout, rng)
        return ag.add(ag.matmul(x, self.cls_w2), self.cls_b2)


def extract_arguments(extractor: ArgumentExtractor, hidden: ag.Tensor,
                      span: PredicateSpan) -> TagSequence:
    return decode_logits(extractor.logits(hidden, span), ARG_TAGS)


def argument_loss(logits: ag.Tensor, gold: TagSequence, mask) -> ag.Tensor:
    return ag.cross_entropy(logits, gold.tag_ids, mask)
