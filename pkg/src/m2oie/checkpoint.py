"""Single-file binary model checkpoints.

Layout: a 6-byte magic ``M2OIE1``, an 8-byte little-endian header length,
a JSON header (format version, model and training config, vocabulary,
and an ordered tensor index of name/shape/offset/nbytes), then the raw
tensor payloads as little-endian 4-byte floats.  Round trips are
bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .encoder import Vocabulary
from .model import Model, ModelConfig
from .training import TrainConfig

MAGIC = b"M2OIE1"
FORMAT_VERSION = "1"

_HEADER_LEN_STRUCT = struct.Struct("<Q")


class CheckpointError(Exception):
    """Base class for checkpoint problems."""


class CheckpointFormatError(CheckpointError):
    """Bad magic, unparseable header, or missing fields."""


class CheckpointVersionError(CheckpointError):
    """The file was written by an unsupported format version."""


class CheckpointTruncatedError(CheckpointError):
    """The file ends before the declared data does."""


class CheckpointShapeError(CheckpointError):
    """A tensor's declared shape disagrees with its byte length."""


@dataclass
class Checkpoint:
    """Everything needed to reconstruct a trained model."""

    version: str
    model_config: dict
    train_config: dict
    vocab_tokens: list[str]
    tensors: dict[str, np.ndarray]


def checkpoint_from_model(model: Model, vocab: Vocabulary,
                          train_config: TrainConfig) -> Checkpoint:
    tensors = {name: np.ascontiguousarray(p.data, dtype="<f4")
               for name, p in model.parameters().items()}
    return Checkpoint(version=FORMAT_VERSION,
                      model_config=model.config.to_dict(),
                      train_config=train_config.to_dict(),
                      vocab_tokens=vocab.tokens,
                      tensors=tensors)


def model_from_checkpoint(ckpt: Checkpoint) -> tuple[Model, Vocabulary]:
    """Rebuild the model and vocabulary; loaded weights replace the init."""
    config = ModelConfig.from_dict(ckpt.model_config)
    model = Model(config, np.random.default_rng(0))
    params = model.parameters()
    missing = params.keys() - ckpt.tensors.keys()
    extra = ckpt.tensors.keys() - params.keys()
    if missing or extra:
        raise CheckpointFormatError(
            f"tensor names disagree with config (missing {sorted(missing)}, "
            f"unexpected {sorted(extra)})")
    for name, p in params.items():
        stored = ckpt.tensors[name]
        if stored.shape != p.data.shape:
            raise CheckpointShapeError(
                f"tensor {name}: stored shape {stored.shape}, "
                f"model expects {p.data.shape}")
        p.data = stored.astype(ag.default_dtype())
    vocab = Vocabulary(ckpt.vocab_tokens)
    if vocab.tokens != ckpt.vocab_tokens:
        raise CheckpointFormatError("vocabulary token list is not canonical")
    return model, vocab


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    index = []
    offset = 0
    payloads = []
    for name, arr in ckpt.tensors.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps({
        "version": ckpt.version,
        "config": {"model": ckpt.model_config, "train": ckpt.train_config},
        "vocab": ckpt.vocab_tokens,
        "tensors": index,
    }, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER_LEN_STRUCT.pack(len(header)))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"bad magic bytes {blob[:len(MAGIC)]!r}")
    pos = len(MAGIC)
    if len(blob) < pos + _HEADER_LEN_STRUCT.size:
        raise CheckpointTruncatedError("file ends inside the header length field")
    (header_len,) = _HEADER_LEN_STRUCT.unpack_from(blob, pos)
    pos += _HEADER_LEN_STRUCT.size
    if len(blob) < pos + header_len:
        raise CheckpointTruncatedError("file ends inside the header")
    try:
        header = json.loads(blob[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"unparseable header: {exc}") from exc
    pos += header_len

    version = header.get("version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"format version {version!r}, supported {FORMAT_VERSION!r}")
    for key in ("config", "vocab", "tensors"):
        if key not in header:
            raise CheckpointFormatError(f"header missing field {key!r}")

    payload = blob[pos:]
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        nbytes = entry["nbytes"]
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if expected != nbytes:
            raise CheckpointShapeError(
                f"tensor {name}: shape {shape} needs {expected} bytes, "
                f"header declares {nbytes}")
        start, stop = entry["offset"], entry["offset"] + nbytes
        if stop > len(payload):
            raise CheckpointTruncatedError(
                f"tensor {name}: payload ends at {len(payload)}, needs {stop}")
        tensors[name] = np.frombuffer(payload[start:stop], dtype="<f4").reshape(shape)
    return Checkpoint(version=version,
                      model_config=header["config"]["model"],
                      train_config=header["config"]["train"],
                      vocab_tokens=list(header["vocab"]),
                      tensors=tensors)
