"""Versioned binary checkpoint.

Layout, all integers little-endian:

    magic `PCCK` | format version u32 | model-kind u8 |
    config length u32 | config text (the flat key=value run config) |
    tensor count u32 | per tensor: ndim u8, dims u32 each |
    parameter values, float64, C order, in param_tensors order

Round-trips are bit-exact: loading a checkpoint and evaluating gives the
same bytes as evaluating the in-memory model.
"""

from __future__ import annotations

import struct

import numpy as np

from .config import RunConfig, parse_config_text
from .learn import init_model, model_param_tensors

MAGIC = b"PCCK"
FORMAT_VERSION = 1
_KIND_CODES = {"pointnet": 0, "pointnetpp": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def save_checkpoint(path, model_kind: str, params, run_config: RunConfig) -> None:
    if model_kind not in _KIND_CODES:
        raise ValueError(f"unknown model kind {model_kind!r}")
    tensors = model_param_tensors(model_kind, params)
    config_text = run_config.to_text().encode("ascii")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", FORMAT_VERSION)
    buf += struct.pack("<B", _KIND_CODES[model_kind])
    buf += struct.pack("<I", len(config_text))
    buf += config_text
    buf += struct.pack("<I", len(tensors))
    for t in tensors:
        shape = t.data.shape
        buf += struct.pack("<B", len(shape))
        for d in shape:
            buf += struct.pack("<I", d)
    for t in tensors:
        buf += np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(buf))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError(f"{self.path}: truncated checkpoint "
                             f"(wanted {n} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def load_checkpoint(path):
    """Returns (model_kind, params, run_config)."""
    with open(path, "rb") as f:
        r = _Reader(f.read(), path)
    if r.take(4) != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: format version {version} not supported "
                         f"(this build reads version {FORMAT_VERSION})")
    kind_code = r.u8()
    if kind_code not in _KIND_NAMES:
        raise ValueError(f"{path}: unknown model-kind code {kind_code}")
    model_kind = _KIND_NAMES[kind_code]
    config_text = r.take(r.u32()).decode("ascii")
    run_config = parse_config_text(config_text, source=f"{path}:config")
    count = r.u32()
    shapes = []
    for _ in range(count):
        ndim = r.u8()
        shapes.append(tuple(r.u32() for _ in range(ndim)))
    total = sum(int(np.prod(s)) if s else 1 for s in shapes)
    values = np.frombuffer(r.take(total * 8), dtype="<f8").astype(np.float64)
    if r.pos != len(r.data):
        raise ValueError(f"{path}: {len(r.data) - r.pos} trailing bytes after parameters")

    # Rebuild the structure from the embedded config, then overwrite values.
    model_cfg = (run_config.pointnet_config() if model_kind == "pointnet"
                 else run_config.pointnetpp_config())
    params = init_model(model_kind, np.random.default_rng(0), model_cfg)
    tensors = model_param_tensors(model_kind, params)
    if len(tensors) != count:
        raise ValueError(f"{path}: checkpoint holds {count} tensors but the embedded "
                         f"config builds {len(tensors)}")
    offset = 0
    for t, shape in zip(tensors, shapes):
        if t.data.shape != shape:
            raise ValueError(f"{path}: tensor shape {shape} does not match "
                             f"the embedded config's {t.data.shape}")
        size = int(np.prod(shape)) if shape else 1
        t.data[...] = values[offset:offset + size].reshape(shape)
        offset += size
    return model_kind, params, run_config
