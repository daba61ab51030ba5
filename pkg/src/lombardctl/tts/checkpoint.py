"""TTTS checkpoint files: named float32 tensors."""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import ModelConfig, TTSModel

MAGIC = b"TTTS"
VERSION = 1


def _tensors(model: TTSModel) -> list[tuple[str, np.ndarray]]:
    items = [(f"config.{f.name}", np.array(getattr(model.config, f.name), dtype=np.float64))
             for f in dataclasses.fields(ModelConfig)]
    items += sorted(model.field.items())
    if model.encoder is not None:
        items += sorted(model.encoder.items())
    return items


def save_checkpoint(model: TTSModel, path) -> None:
    tensors = _tensors(model)
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> TTSModel:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        off = 12
        tensors = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, off)
            name = data[off + 2:off + 2 + n].decode("utf-8")
            off += 2 + n
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if off + 4 * size > len(data):
                raise FormatError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=off).reshape(shape)
            tensors[name] = arr.astype(np.float64)
            off += 4 * size
    except struct.error:
        raise FormatError(f"{path}: truncated checkpoint") from None
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    cfg_fields = {f.name for f in dataclasses.fields(ModelConfig)}
    config = ModelConfig(**{k[7:]: int(v) for k, v in tensors.items()
                            if k.startswith("config.") and k[7:] in cfg_fields})
    field = {k: v for k, v in tensors.items() if not k.startswith(("config.", "encoder."))}
    encoder = {k: v for k, v in tensors.items() if k.startswith("encoder.")} or None
    return TTSModel(config, field, encoder)
