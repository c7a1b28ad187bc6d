"""Joint training of the encoder and both taggers.

One step minimizes the sum of the predicate tagging loss and the
argument tagging loss.  Argument inputs are built from *gold* predicate
spans while training (teacher forcing); predicted spans are only used at
inference time.  The optimizer is Adam with decoupled weight decay,
under a piecewise-linear warmup-then-decay learning rate and global-norm
gradient clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autograd as ag
from .arguments import argument_loss
from .corpus import AnnotatedSentence, merged_predicate_tags, tuples_to_tags
from .encoder import Sentence, Vocabulary
from .model import Model, ModelConfig, desk_model_config
from .predicates import PredicateSpan, TagSequence, predicate_loss


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; training aborted."""


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 16
    epochs: int = 30
    warmup_frac: float = 0.1
    clip_norm: float = 1.0
    weight_decay: float = 0.01
    dropout: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "clip_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in [0, 1)")
        if self.weight_decay < 0 or self.dropout < 0:
            raise ValueError("weight_decay and dropout must be non-negative")

    def to_dict(self) -> dict:
        return vars(self).copy()


@dataclass
class Losses:
    pred_loss: float
    arg_loss: float

    @property
    def total(self) -> float:
        return self.pred_loss + self.arg_loss


@dataclass
class TrainingInstance:
    """A sentence with precomputed gold tag sequences."""

    sentence: Sentence
    pred_gold: TagSequence
    per_tuple: list[tuple[PredicateSpan, TagSequence]]


def prepare_instances(annotated: Sequence[AnnotatedSentence],
                      vocab: Vocabulary) -> list[TrainingInstance]:
    instances = []
    for s in annotated:
        sentence = Sentence(tokens=list(s.tokens),
                            token_ids=[vocab.id_of(t) for t in s.tokens],
                            pad_mask=[True] * len(s.tokens))
        per_tuple = []
        for tup in s.tuples:
            _, arg_gold = tuples_to_tags(s, tup)
            per_tuple.append((PredicateSpan(list(tup.pred)), arg_gold))
        instances.append(TrainingInstance(sentence=sentence,
                                          pred_gold=merged_predicate_tags(s),
                                          per_tuple=per_tuple))
    return instances


def joint_loss(model: Model, batch: Sequence[TrainingInstance], mode: str = "train",
               rng: np.random.Generator | None = None) -> tuple[ag.Tensor, Losses]:
    """Total loss over a batch: mean predicate loss over sentences plus
    mean argument loss over (sentence, predicate) pairs."""
    if not batch:
        raise ValueError("empty batch")
    pred_terms = []
    arg_terms = []
    for inst in batch:
        hidden = model.encode(inst.sentence, mode, rng)
        logits = model.predicate_logits(hidden, mode, rng)
        pred_terms.append(predicate_loss(logits, inst.pred_gold, inst.sentence.pad_mask))
        for span, arg_gold in inst.per_tuple:
            arg_logits = model.argument_logits(hidden, span, mode, rng)
            arg_terms.append(argument_loss(arg_logits, arg_gold, inst.sentence.pad_mask))

    pred_total = pred_terms[0]
    for term in pred_terms[1:]:
        pred_total = ag.add(pred_total, term)
    pred_mean = ag.scale(pred_total, 1.0 / len(pred_terms))

    if arg_terms:
        arg_total = arg_terms[0]
        for term in arg_terms[1:]:
            arg_total = ag.add(arg_total, term)
        arg_mean = ag.scale(arg_total, 1.0 / len(arg_terms))
    else:
        arg_mean = ag.constant(0.0)

    total = ag.add(pred_mean, arg_mean)
    return total, Losses(pred_loss=pred_mean.item(), arg_loss=arg_mean.item())


class AdamW:
    """Adam with decoupled weight decay; vectors (biases, norms) are not decayed."""

    def __init__(self, params: dict[str, ag.Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, lr: float) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad ** 2
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and p.data.ndim >= 2:
                update = update + self.weight_decay * p.data
            p.data -= lr * update


def global_grad_norm(params: Sequence[ag.Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    return math.sqrt(total)


def clip_gradients(params: Sequence[ag.Tensor], max_norm: float) -> float:
    """Scale gradients so their global norm is at most ``max_norm``.

    Returns the pre-clip norm.
    """
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


def lr_at(step: int, total_steps: int, config: TrainConfig) -> float:
    """Piecewise-linear schedule: warmup to the peak rate, then decay to zero.

    ``step`` is 1-based; the peak falls exactly at the last warmup step
    and the final step gets rate zero.
    """
    if not 1 <= step <= total_steps:
        raise ValueError(f"step {step} outside [1, {total_steps}]")
    warmup_steps = int(round(config.warmup_frac * total_steps))
    if step <= warmup_steps:
        return config.learning_rate * step / warmup_steps
    if total_steps == warmup_steps:
        return config.learning_rate
    return config.learning_rate * (total_steps - step) / (total_steps - warmup_steps)


def joint_step(model: Model, batch: Sequence[TrainingInstance], optimizer: AdamW,
               lr: float, config: TrainConfig,
               rng: np.random.Generator) -> Losses:
    """One optimization step: forward, backward, clip, update."""
    model.zero_grad()
    total, losses = joint_loss(model, batch, "train", rng)
    if not math.isfinite(losses.total):
        raise TrainingDiverged(
            f"non-finite loss (pred={losses.pred_loss}, arg={losses.arg_loss})")
    total.backward()
    clip_gradients(list(model.parameters().values()), config.clip_norm)
    optimizer.step(lr)
    return losses


@dataclass
class EpochStats:
    epoch: int
    pred_loss: float
    arg_loss: float
    dev_f1: float | None = None

    @property
    def total(self) -> float:
        return self.pred_loss + self.arg_loss


def train(corpus: Sequence[AnnotatedSentence], config: TrainConfig,
          dev: Sequence[AnnotatedSentence] | None = None,
          model_config: ModelConfig | None = None,
          log: Callable[[str], None] | None = None):
    """Train a model from scratch on ``corpus``.

    When a dev set is given, each epoch is scored by tuple-match F1 and
    the best-scoring epoch's weights are kept.  Returns a checkpoint
    bundle (see :mod:`m2oie.checkpoint`) plus per-epoch statistics.
    """
    from . import checkpoint as ckpt_mod  # local import to avoid a cycle
    from . import evaluation

    if not corpus:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(config.seed)
    vocab = Vocabulary.from_corpus([s.tokens for s in corpus])
    if model_config is None:
        model_config = desk_model_config(len(vocab), dropout=config.dropout)
    model = Model(model_config, rng)
    instances = prepare_instances(corpus, vocab)

    n_batches = math.ceil(len(instances) / config.batch_size)
    total_steps = config.epochs * n_batches
    optimizer = AdamW(model.parameters(), weight_decay=config.weight_decay)

    best_f1 = -1.0
    best_weights: dict[str, np.ndarray] | None = None
    history: list[EpochStats] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(instances))
        epoch_pred, epoch_arg = 0.0, 0.0
        for b in range(n_batches):
            batch = [instances[i] for i in order[b * config.batch_size:
                                                 (b + 1) * config.batch_size]]
            step += 1
            losses = joint_step(model, batch, optimizer,
                                lr_at(step, total_steps, config), config, rng)
            epoch_pred += losses.pred_loss
            epoch_arg += losses.arg_loss
        stats = EpochStats(epoch=epoch, pred_loss=epoch_pred / n_batches,
                           arg_loss=epoch_arg / n_batches)
        if dev:
            stats.dev_f1 = evaluation.corpus_f1(model, vocab, dev, matcher="tuple")
            if stats.dev_f1 > best_f1:
                best_f1 = stats.dev_f1
                best_weights = {name: p.data.copy()
                                for name, p in model.parameters().items()}
        history.append(stats)
        if log is not None:
            dev_part = f"  dev_f1={stats.dev_f1:.4f}" if stats.dev_f1 is not None else ""
            log(f"epoch {epoch:3d}  pred_loss={stats.pred_loss:.4f}  "
                f"arg_loss={stats.arg_loss:.4f}{dev_part}")

    if best_weights is not None:
        for name, p in model.parameters().items():
            p.data = best_weights[name]

    checkpoint = ckpt_mod.checkpoint_from_model(model, vocab, config)
    return checkpoint, history
