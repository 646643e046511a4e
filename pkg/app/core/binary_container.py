"""
Versioned little-endian binary container shared by model checkpoints and
dataset caches. Field order (see docs/formats.md):

    magic        4 bytes ASCII
    version      uint16
    flags        uint16 (reserved, 0)
    meta_len     uint32
    meta         meta_len bytes UTF-8, one `key=<json value>` per line
    n_arrays     uint32
    per array:
        name_len uint16, name UTF-8
        dtype    1 byte ASCII ('d' float64, 'q' int64, 'B' uint8)
        ndim     uint8
        dims     ndim x uint64
        data     raw little-endian values, C order
    crc32        uint32 over every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from app.core.errors import FormatError

_DTYPES: dict[str, np.dtype] = {
    "d": np.dtype("<f8"),
    "q": np.dtype("<i8"),
    "B": np.dtype("u1"),
}


def _dtype_code(name: str, array: np.ndarray) -> str:
    kind = array.dtype.kind
    if kind == "f":
        return "d"
    if kind == "i":
        return "q"
    if kind in {"u", "b"} and array.dtype.itemsize == 1:
        return "B"
    raise ValueError(f"Unsupported dtype {array.dtype} for array {name!r}.")


@dataclass
class Container:
    meta: dict[str, Any] = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def _encode_meta(meta: dict[str, Any]) -> bytes:
    lines = []
    for key, value in meta.items():
        if "=" in key or "\n" in key:
            raise ValueError(f"Invalid metadata key {key!r}.")
        lines.append(f"{key}={json.dumps(value, sort_keys=True)}")
    return "\n".join(lines).encode("utf-8")


def _decode_meta(raw: bytes) -> dict[str, Any]:
    meta: dict[str, Any] = {}
    for line in raw.decode("utf-8").splitlines():
        if not line:
            continue
        key, value = line.split("=", 1)
        meta[key] = json.loads(value)
    return meta


def pack(magic: bytes, version: int, container: Container) -> bytes:
    if len(magic) != 4:
        raise ValueError("magic must be exactly 4 bytes.")
    meta = _encode_meta(container.meta)
    parts = [magic, struct.pack("<HHI", version, 0, len(meta)), meta]
    parts.append(struct.pack("<I", len(container.arrays)))
    for name, array in container.arrays.items():
        code = _dtype_code(name, array)
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack("<cB", code.encode("ascii"), array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def unpack(blob: bytes, *, magic: bytes, version: int, source: str = "<bytes>") -> Container:
    if len(blob) < 16:
        raise FormatError(code="CHECKSUM_MISMATCH", message=f"{source} is truncated.")
    body, (expected_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != expected_crc:
        raise FormatError(
            code="CHECKSUM_MISMATCH",
            message=f"{source} failed its checksum (truncated or corrupt).",
        )
    if body[:4] != magic:
        raise FormatError(
            code="BAD_MAGIC",
            message=f"{source} is not a {magic.decode('ascii')} file.",
        )
    found_version, _flags, meta_len = struct.unpack_from("<HHI", body, 4)
    if found_version != version:
        raise FormatError(
            code="VERSION_MISMATCH",
            message=f"{source} has format version {found_version}, expected {version}.",
        )
    offset = 12
    meta = _decode_meta(body[offset : offset + meta_len])
    offset += meta_len
    (n_arrays,) = struct.unpack_from("<I", body, offset)
    offset += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset : offset + name_len].decode("utf-8")
        offset += name_len
        code, ndim = struct.unpack_from("<cB", body, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}Q", body, offset)
        offset += 8 * ndim
        dtype = _DTYPES[code.decode("ascii")]
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * dtype.itemsize
        data = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
        arrays[name] = data.reshape(shape).astype(dtype.newbyteorder("="), copy=True)
        offset += nbytes
    if offset != len(body):
        raise FormatError(code="TRAILING_BYTES", message=f"{source} has unexpected trailing data.")
    return Container(meta=meta, arrays=arrays)


def write_container(path: str | Path, magic: bytes, version: int, container: Container) -> None:
    Path(path).write_bytes(pack(magic, version, container))


def read_container(path: str | Path, *, magic: bytes, version: int) -> Container:
    target = Path(path)
    if not target.exists():
        raise FormatError(code="FILE_NOT_FOUND", message=f"{target} does not exist.")
    return unpack(target.read_bytes(), magic=magic, version=version, source=str(target))
