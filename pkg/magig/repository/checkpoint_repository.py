"""PGCKPT binary checkpoints.

Layout, all integers little-endian: magic "PGCKPT", u16 version, u32 metadata
length + UTF-8 JSON, u32 tensor count, then per tensor u32 name length + UTF-8
name, u8 dtype tag (0 = f64), u32 rank, u64 per dim, row-major f64 payload.
Tensors are written in name order and metadata with sorted keys, so equal
checkpoints always encode to equal bytes.
"""
import json
import struct
from pathlib import Path

import numpy as np

from magig.core.exception_error import CheckpointError
from magig.core.logger import logger
from magig.model.checkpoint_model import CHECKPOINT_VERSION, Checkpoint
from magig.repository.base_repository import BaseRepository

MAGIC = b"PGCKPT"
DTYPE_F64 = 0


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"checkpoint truncated while reading {what}")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]


def encode(checkpoint: Checkpoint) -> bytes:
    metadata = json.dumps(checkpoint.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", checkpoint.version), struct.pack("<I", len(metadata)), metadata]
    parts.append(struct.pack("<I", len(checkpoint.tensors)))
    for name in sorted(checkpoint.tensors):
        value = np.ascontiguousarray(checkpoint.tensors[name], dtype="<f8")
        encoded = name.encode("utf-8")
        parts += [struct.pack("<I", len(encoded)), encoded, struct.pack("<B", DTYPE_F64), struct.pack("<I", value.ndim)]
        parts += [struct.pack("<Q", dim) for dim in value.shape]
        parts.append(value.tobytes(order="C"))
    return b"".join(parts)


def decode(blob: bytes) -> Checkpoint:
    reader = _Reader(blob)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("not a checkpoint: magic bytes mismatch")
    version = reader.unpack("<H", "version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})")
    length = reader.unpack("<I", "metadata length")
    try:
        metadata = json.loads(reader.take(length, "metadata").decode("utf-8"))
    except ValueError as err:
        raise CheckpointError(f"checkpoint metadata is not valid JSON: {err}")

    count = reader.unpack("<I", "tensor count")
    tensors = {}
    previous = None
    for position in range(count):
        what = f"tensor #{position} of {count}"
        if previous is not None:
            what += f" (after '{previous}')"
        name = reader.take(reader.unpack("<I", f"{what} name length"), f"{what} name").decode("utf-8")
        what = f"tensor '{name}'"
        if reader.unpack("<B", f"{what} dtype") != DTYPE_F64:
            raise CheckpointError(f"{what} has an unknown dtype tag")
        rank = reader.unpack("<I", f"{what} rank")
        shape = tuple(reader.unpack("<Q", f"{what} dims") for _ in range(rank))
        payload = reader.take(8 * int(np.prod(shape, dtype=np.int64)), f"{what} payload")
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
        previous = name
    if reader.offset != len(blob):
        raise CheckpointError(
            f"shape table inconsistent with payload length: {len(blob) - reader.offset} trailing bytes"
        )
    return Checkpoint(version=version, metadata=metadata, tensors=tensors)


class CheckpointRepository(BaseRepository):
    def __init__(self, root="."):
        super().__init__(root)

    def save(self, checkpoint: Checkpoint, path) -> Path:
        target = self._writable(str(path))
        logger.info(f"Writing checkpoint {target} with {len(checkpoint.tensors)} tensors")
        try:
            target.write_bytes(encode(checkpoint))
        except OSError as err:
            raise CheckpointError(f"cannot write checkpoint {target}: {err}")
        return target

    def load(self, path) -> Checkpoint:
        source = self.path(str(path))
        try:
            blob = source.read_bytes()
        except OSError as err:
            raise CheckpointError(f"cannot read checkpoint {source}: {err}")
        return decode(blob)
