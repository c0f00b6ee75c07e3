"""Versioned binary container for training state.

Layout (little-endian):

    bytes 0..7    magic ``RMPCKPT1``
    bytes 8..11   uint32 header length ``H``
    bytes 12..12+H  UTF-8 JSON header (sorted keys)
    remainder     raw array bytes, back to back

The header holds ``{"version", "meta", "arrays"}`` where ``arrays`` is a list
of ``{"name", "dtype", "shape", "offset", "nbytes"}`` records with offsets
relative to the start of the data section. Writing is fully deterministic:
identical state produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RMPCKPT1"
VERSION = 1


class CheckpointError(Exception):
    """Missing, corrupt, or incompatible checkpoint file."""


def write_container(path: str | Path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    records = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        blob = arr.tobytes()
        records.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"version": VERSION, "meta": meta, "arrays": records},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"not a checkpoint file: {path}")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_start = len(MAGIC) + 4
    data_start = header_start + header_len
    if data_start > len(raw):
        raise CheckpointError(f"truncated checkpoint header: {path}")
    try:
        header = json.loads(raw[header_start:data_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {path}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('version')!r} in {path}"
        )
    arrays = {}
    for rec in header["arrays"]:
        start = data_start + rec["offset"]
        end = start + rec["nbytes"]
        if end > len(raw):
            raise CheckpointError(f"truncated checkpoint data: {path}")
        arr = np.frombuffer(raw[start:end], dtype=np.dtype(rec["dtype"]))
        expected = int(np.prod(rec["shape"])) if rec["shape"] else 1
        if arr.size != expected:
            raise CheckpointError(f"corrupt array {rec['name']!r} in {path}")
        arrays[rec["name"]] = arr.reshape(rec["shape"]).copy()
    return header["meta"], arrays
