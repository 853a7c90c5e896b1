"""Binary checkpoint format.

Layout: magic ``HSL1``; uint32 version; uint32-length-prefixed UTF-8 JSON
header; then per tensor a length-prefixed name, uint32 rank, uint32 dims and
row-major float32 little-endian values; finally the CRC32 of every preceding
byte. All integers are little-endian.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .doc_model import LineLabelScheme, TokenLabelScheme
from .features import HandcraftedFeatureSpec
from .model import ModelConfig, TrainedModel
from .neural import ModelParams

MAGIC = b"HSL1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def dumps_model(model: TrainedModel) -> bytes:
    header = {
        "config": model.config.to_json(),
        "feature_dim": model.feature_dim,
        "line_scheme": model.line_scheme.to_json(),
        "token_scheme": model.token_scheme.to_json(),
        "feature_spec": model.feature_spec.to_json() if model.feature_spec is not None else None,
        "feature_spec_digest": model.feature_spec.digest() if model.feature_spec is not None else None,
        "embedding_digest": model.embedding_digest,
        "params_version": ModelParams.version,
    }
    hb = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, _u32(VERSION), _u32(len(hb)), hb]
    for name, arr in model.params.items():
        nb = name.encode("utf-8")
        parts += [_u32(len(nb)), nb, _u32(arr.ndim)] + [_u32(s) for s in arr.shape]
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + _u32(zlib.crc32(body))


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_bytes(dumps_model(model))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def loads_model(buf: bytes) -> TrainedModel:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise CheckpointError("not an HSL1 checkpoint")
    body, crc = buf[:-4], struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch: checkpoint is corrupted")
    r = _Reader(body)
    r.take(4)
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(r.take(r.u32()).decode("utf-8"))
    params = ModelParams()
    while r.pos < len(body):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
        params[name] = arr.astype(np.float64)
    spec = header["feature_spec"]
    ls, ts = header["line_scheme"], header["token_scheme"]
    return TrainedModel(
        config=ModelConfig.from_json(header["config"]),
        params=params,
        feature_dim=header["feature_dim"],
        line_scheme=LineLabelScheme(tuple(ls["plain_sections"]), tuple(ls["grouped_sections"])),
        token_scheme=TokenLabelScheme(tuple(ts["entity_types"]), ts["kind"]),
        feature_spec=HandcraftedFeatureSpec.from_json(spec) if spec is not None else None,
        embedding_digest=header["embedding_digest"],
    )


def load_model(path: str | Path) -> TrainedModel:
    return loads_model(Path(path).read_bytes())
