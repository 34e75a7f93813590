"""Binary tensor blob: b"HRDC", u32 version, u32 count, then per tensor
u16 name length + UTF-8 name, u8 rank, u32 dims, float32 payload (all LE)."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DataError

MAGIC = b"HRDC"
VERSION = 1


def write_blob(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def read_blob(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise DataError("tensor blob: bad magic bytes")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise DataError(f"tensor blob: unsupported version {version}")
        pos = 12
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            payload = data[pos : pos + 4 * size]
            if len(payload) != 4 * size:
                raise DataError(f"tensor blob: truncated payload for {name!r}")
            pos += 4 * size
            if name in out:
                raise DataError(f"tensor blob: duplicate tensor {name!r}")
            out[name] = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)
    except struct.error as exc:
        raise DataError(f"tensor blob: truncated ({exc})") from None
    if pos != len(data):
        raise DataError("tensor blob: trailing bytes")
    return out


def write_checkpoint(header: dict[str, str], tensors: dict[str, np.ndarray]) -> bytes:
    """u32 length + ``key=value`` lines (UTF-8), followed by the tensor blob."""
    lines = []
    for k, v in header.items():
        v = str(v)
        if "=" in k or "\n" in k or "\n" in v:
            raise ValueError(f"header entry {k!r} cannot be encoded")
        lines.append(f"{k}={v}")
    text = ("\n".join(lines) + "\n").encode("utf-8")
    return struct.pack("<I", len(text)) + text + write_blob(tensors)


def read_checkpoint(data: bytes) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    if len(data) < 4:
        raise DataError("checkpoint: truncated header")
    (n,) = struct.unpack_from("<I", data, 0)
    if 4 + n > len(data):
        raise DataError("checkpoint: truncated header")
    try:
        text = data[4 : 4 + n].decode("utf-8")
    except UnicodeDecodeError:
        raise DataError("checkpoint: header is not UTF-8") from None
    header: dict[str, str] = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"checkpoint: malformed header line {line!r}")
        header[key] = value
    return header, read_blob(data[4 + n :])
