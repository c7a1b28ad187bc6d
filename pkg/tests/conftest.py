import numpy as np
import pytest

from m2oie.arguments import ArgConfig
from m2oie.encoder import EncoderConfig
from m2oie.model import Model, ModelConfig


def tiny_model_config(vocab_size: int, dropout: float = 0.0) -> ModelConfig:
    """A minimal but complete configuration for fast tests."""
    return ModelConfig(
        encoder=EncoderConfig(vocab_size=vocab_size, hidden_dim=16, num_layers=1,
                              num_heads=2, ffn_dim=32, max_len=64, dropout=dropout),
        arguments=ArgConfig(num_blocks=1, num_heads=2, pos_dim=4,
                            ffn_dim=72, dropout=dropout),
        head_dropout=dropout,
    )


@pytest.fixture
def tiny_model():
    return Model(tiny_model_config(vocab_size=24), np.random.default_rng(0))
