"""Writers and readers for the ranking engine's interchange files.

The bridge talks to the engine exclusively through files, so this module
reimplements the three on-disk formats from their byte layout rather than
importing the engine:

* logit file — concatenated records, each ``"HLGT" | u32 version=1 |
  u32 rows | u32 cols`` followed by ``rows*cols`` little-endian float32
  values in row-major order;
* dense file — ``u32 count | u32 width`` followed by ``count*width``
  little-endian float32 values;
* sidecar manifest — a JSON array with one ``{"id", "source",
  "surface_tokens"}`` object per record, in file order.

Everything is little-endian; an empty logit file is zero bytes long.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import BridgeFormatError

LOGIT_MAGIC = b"HLGT"
LOGIT_VERSION = 1

_REC_HEADER = struct.Struct("<4sIII")
_DENSE_HEADER = struct.Struct("<II")


def write_logit_records(path, matrices) -> int:
    """Append nothing, write all: one HLGT record per 2-D float matrix.

    Returns the number of records written.
    """
    count = 0
    with open(path, "wb") as fh:
        for m in matrices:
            m = np.ascontiguousarray(m, dtype="<f4")
            if m.ndim != 2:
                raise BridgeFormatError(f"logit matrix must be 2-D, got shape {m.shape}")
            rows, cols = m.shape
            fh.write(_REC_HEADER.pack(LOGIT_MAGIC, LOGIT_VERSION, rows, cols))
            fh.write(m.tobytes(order="C"))
            count += 1
    return count


def read_logit_records(path) -> list[np.ndarray]:
    """Parse an HLGT file back into a list of float32 matrices."""
    with open(path, "rb") as fh:
        data = fh.read()
    matrices: list[np.ndarray] = []
    offset = 0
    while offset < len(data):
        if len(data) - offset < _REC_HEADER.size:
            raise BridgeFormatError(f"{path}: truncated record header at byte {offset}")
        magic, version, rows, cols = _REC_HEADER.unpack_from(data, offset)
        if magic != LOGIT_MAGIC:
            raise BridgeFormatError(f"{path}: bad magic {magic!r} at byte {offset}")
        if version != LOGIT_VERSION:
            raise BridgeFormatError(f"{path}: unsupported logit record version {version}")
        offset += _REC_HEADER.size
        nbytes = rows * cols * 4
        if len(data) - offset < nbytes:
            raise BridgeFormatError(f"{path}: record declares {rows}x{cols} floats but file ends early")
        m = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset)
        matrices.append(m.reshape(rows, cols).copy())
        offset += nbytes
    return matrices


def write_dense_matrix(path, vectors: np.ndarray) -> None:
    """Write a count-by-width float32 matrix with its u32 header pair."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise BridgeFormatError(f"dense vectors must form a 2-D array, got {vectors.shape}")
    count, width = vectors.shape
    with open(path, "wb") as fh:
        fh.write(_DENSE_HEADER.pack(count, width))
        fh.write(vectors.tobytes(order="C"))


def read_dense_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _DENSE_HEADER.size:
        raise BridgeFormatError(f"{path}: missing dense file header")
    count, width = _DENSE_HEADER.unpack_from(data, 0)
    nbytes = count * width * 4
    if len(data) - _DENSE_HEADER.size < nbytes:
        raise BridgeFormatError(f"{path}: dense file declares {count}x{width} floats but ends early")
    vecs = np.frombuffer(data, dtype="<f4", count=count * width, offset=_DENSE_HEADER.size)
    return vecs.reshape(count, width).copy()


def write_sidecar_manifest(path, entries: list[dict]) -> None:
    """Write the JSON manifest the engine's encode subcommand expects."""
    for i, entry in enumerate(entries):
        for key in ("id", "source", "surface_tokens"):
            if key not in entry:
                raise BridgeFormatError(f"manifest entry {i} lacks {key!r}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=2)
        fh.write("\n")


def read_sidecar_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise BridgeFormatError(f"{path}: manifest must be a JSON array")
    return entries


def write_vocab_map(path, id_to_token: dict[int, str]) -> None:
    """Write the token-id -> token-string map (useful for engine explain output)."""
    payload = {str(i): t for i, t in sorted(id_to_token.items())}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def read_engine_reps(path) -> list[dict]:
    """Parse the engine's representation JSONL output.

    Each line carries ``id``, ``source``, ``dense`` (list of floats),
    ``sparse`` (token id -> weight, keys stringified by JSON) and
    ``tokens``.  Sparse keys are converted back to ints here.
    """
    items: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeFormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            obj["sparse"] = {int(tid): float(w) for tid, w in obj["sparse"].items()}
            items.append(obj)
    return items
