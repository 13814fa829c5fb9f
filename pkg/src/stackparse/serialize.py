"""Versioned binary container for models.

Layout (all integers little-endian)::

    magic     8 bytes  b"STKLSTM\\x00"
    version   u32
    hdr_len   u64, followed by hdr_len bytes of UTF-8 JSON
    count     u32
    count x { name_len u16, name, ndim u8, dims u32[ndim], trainable u8,
              prod(dims) float64 values (<f8, row-major) }

The JSON header holds the model configuration (dimensions and ablation
flags), the vocabulary and the pretrained word list.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ModelFormatError
from .model import ModelConfig, ParserModel
from .vocab import EmbeddingTable, Vocabulary

MAGIC = b"STKLSTM\x00"
VERSION = 1


def write_container(path, header: dict, arrays: list[tuple[str, np.ndarray, bool]]) -> None:
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(hdr)))
        f.write(hdr)
        f.write(struct.pack("<I", len(arrays)))
        for name, value, trainable in arrays:
            bname = name.encode("utf-8")
            f.write(struct.pack("<HB", len(bname), value.ndim) + bname)
            f.write(struct.pack(f"<{value.ndim}I", *value.shape))
            f.write(struct.pack("<B", int(trainable)))
            f.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def read_container(path) -> tuple[dict, dict[str, tuple[np.ndarray, bool]]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    pos = 8

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise ModelFormatError(f"{path}: truncated model file")
        out = struct.unpack_from(fmt, data, pos)
        pos += size
        return out

    version, hdr_len = take("<IQ")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    if pos + hdr_len > len(data):
        raise ModelFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[pos:pos + hdr_len].decode("utf-8"))
    except ValueError as e:
        raise ModelFormatError(f"{path}: unreadable header: {e}") from None
    pos += hdr_len
    (count,) = take("<I")
    arrays = {}
    for _ in range(count):
        name_len, ndim = take("<HB")
        if pos + name_len > len(data):
            raise ModelFormatError(f"{path}: truncated model file")
        try:
            name = data[pos:pos + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise ModelFormatError(f"{path}: corrupt parameter name") from None
        pos += name_len
        shape = take(f"<{ndim}I")
        (trainable,) = take("<B")
        n = int(np.prod(shape))
        if pos + 8 * n > len(data):
            raise ModelFormatError(f"{path}: truncated data for {name}")
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape)
        pos += 8 * n
        arrays[name] = (arr.astype(np.float64), bool(trainable))
    if pos != len(data):
        raise ModelFormatError(f"{path}: trailing bytes after parameters")
    return header, arrays


def save_model(model: ParserModel, path) -> None:
    header = {
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_dict(),
        "pretrained_words": model.pretrained_words,
    }
    arrays = [(p.name, p.value, p.trainable) for p in model.store]
    write_container(path, header, arrays)


def load_model(path, expected: dict | ModelConfig | None = None) -> ParserModel:
    """Rebuild a model; ``expected`` entries must match the stored configuration."""
    header, arrays = read_container(path)
    try:
        config = ModelConfig.from_dict(header["config"])
        vocab = Vocabulary.from_dict(header["vocab"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: bad header: {e}") from None
    if expected is not None:
        want = expected.to_dict() if isinstance(expected, ModelConfig) else dict(expected)
        stored = config.to_dict()
        diff = {k: (v, stored.get(k)) for k, v in want.items() if stored.get(k) != v}
        if diff:
            detail = ", ".join(f"{k}: requested {a!r}, model has {b!r}" for k, (a, b) in diff.items())
            raise ModelFormatError(f"{path}: configuration mismatch ({detail})")

    words = header.get("pretrained_words", [])
    table = None
    if config.use_pretrained:
        if "pretrained" not in arrays:
            raise ModelFormatError(f"{path}: missing pretrained table")
        table = EmbeddingTable(words, arrays["pretrained"][0][1:])
    model = ParserModel(config, vocab, table, init="zeros")
    names = set(model.store.names())
    if names != set(arrays):
        missing = sorted(names - set(arrays))
        extra = sorted(set(arrays) - names)
        raise ModelFormatError(f"{path}: parameter set mismatch (missing {missing}, extra {extra})")
    for name, (value, _) in arrays.items():
        p = model.store[name]
        if p.value.shape != value.shape:
            raise ModelFormatError(f"{path}: {name} has shape {value.shape}, "
                                   f"expected {p.value.shape}")
        p.value[...] = value
    return model
