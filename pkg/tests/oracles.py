"""Independent brute-force reference implementations used by the tests.

Everything here is written as explicit per-element Python loops so that
it shares no code path with the library being checked.
"""

import math

import numpy as np


def loop_linear(x, w, b):
    rows, in_dim = x.shape
    cols = w.shape[1]
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            s = float(b[j])
            for m in range(in_dim):
                s += float(x[i, m]) * float(w[m, j])
            out[i, j] = s
    return out


def loop_softmax_row(row):
    m = max(float(v) for v in row)
    exps = [math.exp(float(v) - m) for v in row]
    total = sum(exps)
    return [e / total for e in exps]


def loop_layer_norm(x, gain, bias, eps=1e-5):
    rows, cols = x.shape
    out = np.zeros_like(x)
    for i in range(rows):
        mean = sum(float(v) for v in x[i]) / cols
        var = sum((float(v) - mean) ** 2 for v in x[i]) / cols
        inv = 1.0 / math.sqrt(var + eps)
        for j in range(cols):
            out[i, j] = (float(x[i, j]) - mean) * inv * float(gain[j]) + float(bias[j])
    return out


def loop_relu(x):
    out = np.zeros_like(x)
    rows, cols = x.shape
    for i in range(rows):
        for j in range(cols):
            out[i, j] = x[i, j] if x[i, j] > 0 else 0.0
    return out


def loop_attention_block(x, span, weights, num_heads):
    """Reference forward pass of one cross-attention block.

    ``weights`` is the dict returned by ``AttentionBlock.parameters()``
    with numpy values; ``span`` lists the key/value row indices.
    """
    length, dim = x.shape
    head_dim = dim // num_heads
    kv = x[list(span)]
    q = loop_linear(x, weights["wq"], weights["bq"])
    k = loop_linear(kv, weights["wk"], weights["bk"])
    v = loop_linear(kv, weights["wv"], weights["bv"])

    concat = np.zeros((length, dim))
    for h in range(num_heads):
        lo = h * head_dim
        for i in range(length):
            scores = []
            for j in range(len(span)):
                s = 0.0
                for m in range(head_dim):
                    s += float(q[i, lo + m]) * float(k[j, lo + m])
                scores.append(s / math.sqrt(head_dim))
            attn = loop_softmax_row(scores)
            for m in range(head_dim):
                z = 0.0
                for j in range(len(span)):
                    z += attn[j] * float(v[j, lo + m])
                concat[i, lo + m] = z

    attended = loop_linear(concat, weights["wo"], weights["bo"])
    x1 = loop_layer_norm(x + attended, weights["ln1_gain"], weights["ln1_bias"])
    inner = loop_relu(loop_linear(x1, weights["ffn_w1"], weights["ffn_b1"]))
    ffn = loop_linear(inner, weights["ffn_w2"], weights["ffn_b2"])
    return loop_layer_norm(x1 + ffn, weights["ln2_gain"], weights["ln2_bias"])


def random_block_instance(rng, length, span_len, dim, num_heads):
    """Random inputs plus randomized weights for an attention-block check."""
    start = int(rng.integers(0, length - span_len + 1))
    span = tuple(range(start, start + span_len))
    x = rng.normal(size=(length, dim))
    weights = {}
    for name in ("wq", "wk", "wv", "wo"):
        weights[name] = rng.normal(size=(dim, dim))
    for name, shape in (("ffn_w1", (dim, 2 * dim)), ("ffn_w2", (2 * dim, dim))):
        weights[name] = rng.normal(size=shape)
    for name in ("bq", "bk", "bv", "bo", "ln1_bias", "ln2_bias"):
        weights[name] = rng.normal(size=dim) * 0.1
    weights["ffn_b1"] = rng.normal(size=2 * dim) * 0.1
    weights["ffn_b2"] = rng.normal(size=dim) * 0.1
    for name in ("ln1_gain", "ln2_gain"):
        weights[name] = 1.0 + rng.normal(size=dim) * 0.1
    return x, span, weights
