"""Versioned binary checkpoint for the fusion model.

Layout: 8-byte magic ``FSTCKPT1``; a u32 little-endian byte length followed
by that many bytes of config text (``key=value`` lines, one per FstConfig
field, in field order); then every parameter as 32-bit little-endian floats,
concatenated in ``named_parameters`` order.  Weights are stored and loaded
as float32, so save → load → save is bit-exact.
"""

from __future__ import annotations

import dataclasses
import struct
from pathlib import Path

import numpy as np

from .model import FstConfig, FstParams, alloc_params

MAGIC = b"FSTCKPT1"


def _config_block(config: FstConfig) -> bytes:
    lines = []
    for f in dataclasses.fields(FstConfig):
        v = getattr(config, f.name)
        # repr round-trips floats exactly; ints and the mode print plainly
        lines.append(f"{f.name}={v!r}" if isinstance(v, float) else f"{f.name}={v}")
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse_config_block(block: bytes) -> FstConfig:
    pairs = {}
    for line in block.decode("ascii").splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed checkpoint config line: {line!r}")
        pairs[key] = value
    return FstConfig.from_dict(pairs)


def save_checkpoint(path, params: FstParams) -> None:
    params.check_finite()
    cfg = _config_block(params.config)
    chunks = [MAGIC, struct.pack("<I", len(cfg)), cfg]
    for _, p in params.named_parameters():
        chunks.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> FstParams:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < 12:
        raise ValueError(f"{path}: truncated header")
    (cfg_len,) = struct.unpack_from("<I", raw, 8)
    body = 12 + cfg_len
    if len(raw) < body:
        raise ValueError(f"{path}: truncated config block")
    config = _parse_config_block(raw[12:body])

    params = alloc_params(config, dtype=np.float32)
    offset = body
    for name, p in params.named_parameters():
        nbytes = 4 * p.size
        if offset + nbytes > len(raw):
            raise ValueError(f"{path}: truncated at parameter {name}")
        flat = np.frombuffer(raw, dtype="<f4", count=p.size, offset=offset)
        p.data[...] = flat.reshape(p.shape)
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return params.check_finite()
