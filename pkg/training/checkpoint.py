"""
Binary checkpoint format.

    "MSGV" | u32 version | u64 step
    rng block:    u32 count, then per generator: u32 name length, name,
                  16-byte state, 16-byte increment, u8 has_uint32, u32 uinteger
    config block: u32 length, UTF-8 config echo
    tensor table: u32 count, then per tensor: u32 name length, name, u8 dtype
                  tag, u32 ndim, u64 dims..., little-endian row-major payload
    u32 CRC32 of every preceding byte

All integers are little-endian.
"""
from __future__ import annotations

import logging
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from msgv_types.errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)

logger = logging.getLogger(__name__)

MAGIC = b"MSGV"
VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_TAG_OF = {np.dtype("float64"): 0, np.dtype("float32"): 1}


@dataclass
class Checkpoint:
    step: int
    config_text: str = ""
    rng_states: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode(ckpt: Checkpoint) -> bytes:
    parts = [MAGIC, struct.pack("<IQ", VERSION, ckpt.step)]

    parts.append(struct.pack("<I", len(ckpt.rng_states)))
    for name, state in ckpt.rng_states.items():
        if state.get("bit_generator") != "PCG64":
            raise CheckpointError(f"rng '{name}': only PCG64 state can be stored")
        inner = state["state"]
        parts.append(_pack_name(name))
        parts.append(int(inner["state"]).to_bytes(16, "little"))
        parts.append(int(inner["inc"]).to_bytes(16, "little"))
        parts.append(struct.pack("<BI", int(state["has_uint32"]), int(state["uinteger"])))

    config = ckpt.config_text.encode("utf-8")
    parts.append(struct.pack("<I", len(config)) + config)

    parts.append(struct.pack("<I", len(ckpt.tensors)))
    for name, array in ckpt.tensors.items():
        array = np.asarray(array)
        if array.dtype not in _TAG_OF:
            raise CheckpointError(f"tensor '{name}': unsupported dtype {array.dtype}")
        tag = _TAG_OF[array.dtype]
        parts.append(_pack_name(name))
        parts.append(struct.pack("<BI", tag, array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=DTYPE_TAGS[tag]).tobytes())

    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointTruncatedError(f"checkpoint truncated at byte {self.pos} (wanted {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (length,) = self.unpack("<I")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"name at byte {self.pos} is not valid UTF-8") from None


def decode(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC):
        raise CheckpointTruncatedError("checkpoint shorter than its magic")
    if data[:4] != MAGIC:
        raise CheckpointMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    reader = _Reader(data)
    reader.take(4)
    version, step = reader.unpack("<IQ")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version} is not supported (expected {VERSION})")

    rng_states: Dict[str, Dict[str, Any]] = {}
    (count,) = reader.unpack("<I")
    for _ in range(count):
        name = reader.name()
        state = int.from_bytes(reader.take(16), "little")
        inc = int.from_bytes(reader.take(16), "little")
        has_uint32, uinteger = reader.unpack("<BI")
        rng_states[name] = {
            "bit_generator": "PCG64",
            "state": {"state": state, "inc": inc},
            "has_uint32": has_uint32,
            "uinteger": uinteger,
        }

    (length,) = reader.unpack("<I")
    config_text = reader.take(length).decode("utf-8", errors="replace")

    tensors: Dict[str, np.ndarray] = {}
    (count,) = reader.unpack("<I")
    for _ in range(count):
        name = reader.name()
        tag, ndim = reader.unpack("<BI")
        if tag not in DTYPE_TAGS:
            raise CheckpointError(f"tensor '{name}': unknown dtype tag {tag}")
        shape = reader.unpack(f"<{ndim}Q")
        dtype = DTYPE_TAGS[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = reader.take(nbytes)
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))

    body_end = reader.pos
    (stored,) = reader.unpack("<I")
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} unexpected trailing bytes after checksum")
    actual = zlib.crc32(data[:body_end]) & 0xFFFFFFFF
    if stored != actual:
        raise CheckpointChecksumError(f"checksum mismatch: stored {stored:08x}, computed {actual:08x}")
    return Checkpoint(step=step, config_text=config_text, rng_states=rng_states, tensors=tensors)


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(ckpt))
    os.replace(tmp, path)
    logger.info("checkpoint step %d -> %s (%d tensors)", ckpt.step, path, len(ckpt.tensors))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    ckpt = decode(Path(path).read_bytes())
    logger.info("loaded checkpoint %s at step %d", path, ckpt.step)
    return ckpt
