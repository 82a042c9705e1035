"""AVF1 model container: a sectioned binary file with checksums.

Layout (all little-endian):

    magic "AVF1" | u32 format version (1) | u32 section count
    per section: u16 name length | name utf-8 | u64 payload offset | u64 payload length | u32 crc32
    payloads (concatenated, in table order)

Sections are opaque byte strings to the container; known sections encode a
dict of numpy arrays plus JSON metadata via :func:`encode_arrays` /
:func:`decode_arrays`.  Unknown sections survive a load/save round trip
untouched, and any checksum mismatch aborts the whole load.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"AVF1"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    pass


def save_container(path, sections: dict[str, bytes]) -> None:
    names = list(sections.keys())
    payloads = [sections[n] for n in names]
    table = bytearray()
    offset = 0
    header_len = 4 + 4 + 4 + sum(2 + len(n.encode()) + 8 + 8 + 4 for n in names)
    for name, payload in zip(names, payloads):
        nb = name.encode()
        table += struct.pack("<H", len(nb)) + nb
        table += struct.pack("<QQI", header_len + offset, len(payload), zlib.crc32(payload))
        offset += len(payload)
    blob = MAGIC + struct.pack("<II", FORMAT_VERSION, len(names)) + bytes(table) + b"".join(payloads)
    Path(path).write_bytes(blob)


def load_container(path) -> dict[str, bytes]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ContainerError("not an AVF1 container")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported container version {version}")
    pos = 12
    sections: dict[str, bytes] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + nlen].decode()
        pos += nlen
        off, length, crc = struct.unpack_from("<QQI", blob, pos)
        pos += 20
        payload = blob[off : off + length]
        if len(payload) != length or zlib.crc32(payload) != crc:
            raise ContainerError(f"checksum mismatch in section {name!r}")
        sections[name] = payload
    return sections


# -- array-dict section codec ---------------------------------------------

_DTYPES = {"f8": "<f8", "f4": "<f4", "i8": "<i8", "u1": "|u1"}


def encode_arrays(arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    """Serialize named arrays + JSON metadata into a section payload."""
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        tag = {np.dtype(np.float64): "f8", np.dtype(np.float32): "f4",
               np.dtype(np.int64): "i8", np.dtype(np.uint8): "u1"}.get(arr.dtype)
        if tag is None:
            raise ContainerError(f"unsupported dtype {arr.dtype} for array {name!r}")
        raw = arr.astype(_DTYPES[tag], copy=False).tobytes()
        entries.append({"name": name, "dtype": tag, "shape": list(arr.shape), "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True, separators=(",", ":")).encode()
    return struct.pack("<I", len(header)) + header + b"".join(chunks)


def decode_arrays(payload: bytes) -> tuple[dict[str, np.ndarray], dict]:
    (hlen,) = struct.unpack_from("<I", payload, 0)
    header = json.loads(payload[4 : 4 + hlen].decode())
    base = 4 + hlen
    arrays = {}
    for e in header["arrays"]:
        dt = np.dtype(_DTYPES[e["dtype"]])
        arr = np.frombuffer(payload, dtype=dt, count=int(np.prod(e["shape"], dtype=np.int64)) if e["shape"] else 1,
                            offset=base + e["offset"])
        arrays[e["name"]] = arr.reshape(e["shape"]).copy()
    return arrays, header["meta"]
