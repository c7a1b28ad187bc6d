"""The assembled extraction model: encoder, predicate head, argument extractor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .arguments import ArgConfig, ArgumentExtractor, extract_arguments
from .encoder import Encoder, EncoderConfig, Sentence
from .predicates import PredicateSpan, PredicateTagger, TagSequence, tag_predicates


@dataclass
class ModelConfig:
    encoder: EncoderConfig
    arguments: ArgConfig = field(default_factory=ArgConfig)
    head_dropout: float = 0.2

    def to_dict(self) -> dict:
        return {
            "encoder": vars(self.encoder).copy(),
            "arguments": vars(self.arguments).copy(),
            "head_dropout": self.head_dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(encoder=EncoderConfig(**d["encoder"]),
                   arguments=ArgConfig(**d["arguments"]),
                   head_dropout=d["head_dropout"])


class Model:
    """End-to-end two-step tagger.

    Weights are mutable only through the optimizer; forward passes in
    eval mode are pure functions of the inputs and may run concurrently.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.encoder = Encoder(config.encoder, rng)
        self.predicate_tagger = PredicateTagger(
            config.encoder.hidden_dim, config.head_dropout, rng)
        self.argument_extractor = ArgumentExtractor(
            config.encoder.hidden_dim, config.arguments, rng)

    def parameters(self) -> dict[str, ag.Tensor]:
        params: dict[str, ag.Tensor] = {}
        for prefix, module in (("encoder", self.encoder),
                               ("pred", self.predicate_tagger),
                               ("arg", self.argument_extractor)):
            for name, p in module.parameters().items():
                params[f"{prefix}.{name}"] = p
        return params

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def encode(self, sentence: Sentence, mode: str = "eval",
               rng: np.random.Generator | None = None) -> ag.Tensor:
        return self.encoder.encode(sentence, mode, rng)

    def predicate_logits(self, hidden: ag.Tensor, mode: str = "eval",
                         rng: np.random.Generator | None = None) -> ag.Tensor:
        return self.predicate_tagger.logits(hidden, mode, rng)

    def argument_logits(self, hidden: ag.Tensor, span: PredicateSpan,
                        mode: str = "eval",
                        rng: np.random.Generator | None = None) -> ag.Tensor:
        return self.argument_extractor.logits(hidden, span, mode, rng)

    def tag_predicates(self, hidden: ag.Tensor) -> TagSequence:
        return tag_predicates(self.predicate_tagger, hidden)

    def tag_arguments(self, hidden: ag.Tensor, span: PredicateSpan) -> TagSequence:
        return extract_arguments(self.argument_extractor, hidden, span)


def desk_model_config(vocab_size: int, dropout: float = 0.2) -> ModelConfig:
    """The default desk-scale configuration: small enough to train on a CPU
    in minutes, large enough to memorize a few hundred sentences."""
    return ModelConfig(
        encoder=EncoderConfig(vocab_size=vocab_size, hidden_dim=64, num_layers=2,
                              num_heads=4, ffn_dim=256, max_len=64, dropout=0.1),
        arguments=ArgConfig(num_blocks=4, num_heads=8, pos_dim=16,
                            ffn_dim=None, dropout=dropout),
        head_dropout=dropout,
    )
