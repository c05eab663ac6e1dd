"""Sparse lexical representations derived from per-token vocabulary logits.

A raw logit matrix (one row per input token, one column per vocabulary term)
is turned into a term-importance vector by a saturating transform and a
column-wise aggregation, then pruned to its top-k weights.  The result is an
expansion-aware sparse representation: terms absent from the surface text can
carry positive weight.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    TruncatedFileError,
    ValidationError,
    VersionError,
)

AGGREGATION_MODES = ("max", "sum")

LOGIT_MAGIC = b"HLGT"
LOGIT_VERSION = 1


@dataclass(frozen=True)
class EncodeConfig:
    """Sparsification settings: top-k budget and column aggregation mode."""

    k: int
    aggregation: str = "max"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.aggregation not in AGGREGATION_MODES:
            raise ConfigError(
                f"aggregation must be one of {AGGREGATION_MODES}, got {self.aggregation!r}"
            )


@dataclass(eq=False)
class SparseRep:
    """Canonical sparse lexical representation.

    Token ids are strictly ascending, weights are strictly positive float32,
    and the entry count never exceeds ``k_limit``.  Equality is structural
    (bit-exact ids and weights, same k_limit).
    """

    token_ids: np.ndarray
    weights: np.ndarray
    k_limit: int

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int32)
        self.weights = np.asarray(self.weights, dtype=np.float32)
        if self.token_ids.ndim != 1 or self.weights.ndim != 1:
            raise ValidationError("sparse rep arrays must be one-dimensional")
        if len(self.token_ids) != len(self.weights):
            raise ValidationError(
                f"{len(self.token_ids)} token ids but {len(self.weights)} weights"
            )
        if len(self.token_ids) > self.k_limit:
            raise ValidationError(
                f"{len(self.token_ids)} entries exceed k_limit={self.k_limit}"
            )
        if len(self.token_ids) > 0:
            if self.token_ids.min() < 0:
                raise ValidationError("token ids must be nonnegative")
            if np.any(np.diff(self.token_ids) <= 0):
                raise ValidationError("token ids must be strictly ascending")
            if not np.all(self.weights > 0):
                raise ValidationError("zero or negative weights must not be stored")

    @property
    def nnz(self) -> int:
        return len(self.token_ids)

    @classmethod
    def empty(cls, k_limit: int = 0) -> "SparseRep":
        return cls(np.empty(0, dtype=np.int32), np.empty(0, dtype=np.float32), k_limit)

    @classmethod
    def from_dict(cls, mapping: dict, k_limit: int | None = None) -> "SparseRep":
        """Build from a ``{token_id: weight}`` mapping (JSON keys may be strings)."""
        ids = np.array(sorted(int(t) for t in mapping), dtype=np.int32)
        weights = np.array([float(mapping[t]) for t in sorted(mapping, key=int)], dtype=np.float32)
        keep = weights > 0
        ids, weights = ids[keep], weights[keep]
        if k_limit is None:
            k_limit = len(ids)
        return cls(ids, weights, k_limit)

    def to_dict(self) -> dict[str, float]:
        return {str(int(t)): float(w) for t, w in zip(self.token_ids, self.weights)}

    def truncate(self, k: int) -> "SparseRep":
        """Keep only the k largest weights (ties: smaller token id wins)."""
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        if self.nnz <= k:
            return SparseRep(self.token_ids.copy(), self.weights.copy(), k)
        order = np.argsort(-self.weights.astype(np.float64), kind="stable")[:k]
        keep = np.sort(order)
        return SparseRep(self.token_ids[keep], self.weights[keep], k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseRep):
            return NotImplemented
        return (
            self.k_limit == other.k_limit
            and np.array_equal(self.token_ids, other.token_ids)
            and self.weights.tobytes() == other.weights.tobytes()
        )


def _check_finite(matrix: np.ndarray, name: str = "logits"):
    bad = ~np.isfinite(matrix)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValidationError(
            f"{name}[{i},{j}] is {matrix[i, j]}; only finite values are accepted"
        )


def saturate(matrix: np.ndarray) -> np.ndarray:
    """Clamp logits at zero and damp large values: log(1 + relu(m)) elementwise.

    Raises ValidationError naming the first non-finite cell.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValidationError(f"logit matrix must be 2-D, got shape {matrix.shape}")
    _check_finite(matrix)
    return np.log1p(np.maximum(matrix, 0))


def aggregate(saturated: np.ndarray, mode: str = "max") -> np.ndarray:
    """Collapse per-token rows into one importance weight per vocabulary term."""
    saturated = np.asarray(saturated)
    if saturated.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {saturated.shape}")
    if mode not in AGGREGATION_MODES:
        raise ConfigError(f"aggregation must be one of {AGGREGATION_MODES}, got {mode!r}")
    if np.any(saturated < 0):
        raise ValidationError("aggregate expects saturated input (all entries >= 0)")
    if mode == "max":
        return saturated.max(axis=0)
    return saturated.sum(axis=0)


def topk_sparsify(weights: np.ndarray, k: int) -> SparseRep:
    """Retain the k largest positive weights.

    Ties at the k-th weight are broken in favour of the smaller token id, so
    repeated runs produce identical representations.  Zero weights are never
    stored; an all-zero input yields an empty representation.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    weights = np.asarray(weights)
    if weights.ndim != 1:
        raise ValidationError(f"weight vector must be 1-D, got shape {weights.shape}")
    # Stable sort on the negated weights keeps ascending token ids among ties.
    order = np.argsort(-weights.astype(np.float64), kind="stable")[:k]
    order = order[weights[order] > 0]
    keep = np.sort(order)
    return SparseRep(keep.astype(np.int32), weights[keep].astype(np.float32), k)


def encode(matrix: np.ndarray, cfg: EncodeConfig) -> SparseRep:
    """Full sparsification pipeline: saturate, aggregate, top-k prune."""
    return topk_sparsify(aggregate(saturate(matrix), cfg.aggregation), cfg.k)


# ---------------------------------------------------------------------------
# Logit file format (HLGT) and companions
# ---------------------------------------------------------------------------
#
# A logit file is a concatenation of records, one per input item:
#   magic "HLGT" | u32 version=1 | u32 rows | u32 cols | rows*cols f32 (row-major)
# all little-endian.  A sidecar JSON manifest carries one object per record:
#   {"id": ..., "source": ..., "surface_tokens": [...]}
# A dense vector file is: u32 count | u32 width | count*width f32, little-endian.

_REC_HEADER = struct.Struct("<4sIII")
_DENSE_HEADER = struct.Struct("<II")


def write_logit_file(path, matrices) -> None:
    """Write a sequence of 2-D float matrices as consecutive HLGT records."""
    with open(path, "wb") as fh:
        for m in matrices:
            m = np.asarray(m, dtype="<f4")
            if m.ndim != 2:
                raise ValidationError(f"logit matrix must be 2-D, got shape {m.shape}")
            rows, cols = m.shape
            fh.write(_REC_HEADER.pack(LOGIT_MAGIC, LOGIT_VERSION, rows, cols))
            fh.write(m.tobytes(order="C"))


def read_logit_file(path) -> list[np.ndarray]:
    """Read all HLGT records; returns a list of float32 matrices."""
    matrices = []
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    while offset < len(data):
        if len(data) - offset < _REC_HEADER.size:
            raise TruncatedFileError(f"{path}: truncated record header at byte {offset}")
        magic, version, rows, cols = _REC_HEADER.unpack_from(data, offset)
        if magic != LOGIT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at byte {offset}")
        if version != LOGIT_VERSION:
            raise VersionError(f"{path}: unsupported logit file version {version}")
        offset += _REC_HEADER.size
        nbytes = rows * cols * 4
        if len(data) - offset < nbytes:
            raise TruncatedFileError(
                f"{path}: record declares {rows}x{cols} floats but file ends early"
            )
        m = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset)
        matrices.append(m.reshape(rows, cols).copy())
        offset += nbytes
    return matrices


def write_dense_file(path, vectors: np.ndarray) -> None:
    """Write an item-count by width float32 matrix of dense vectors."""
    vectors = np.asarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ValidationError(f"dense vectors must form a 2-D array, got {vectors.shape}")
    count, width = vectors.shape
    with open(path, "wb") as fh:
        fh.write(_DENSE_HEADER.pack(count, width))
        fh.write(vectors.tobytes(order="C"))


def read_dense_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _DENSE_HEADER.size:
        raise TruncatedFileError(f"{path}: missing dense file header")
    count, width = _DENSE_HEADER.unpack_from(data, 0)
    nbytes = count * width * 4
    if len(data) - _DENSE_HEADER.size < nbytes:
        raise TruncatedFileError(f"{path}: dense file declares {count}x{width} floats but ends early")
    vecs = np.frombuffer(data, dtype="<f4", count=count * width, offset=_DENSE_HEADER.size)
    return vecs.reshape(count, width).copy()


def read_manifest(path) -> list[dict]:
    """Read the sidecar manifest: a JSON array of {id, source, surface_tokens}."""
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON array")
    for i, entry in enumerate(entries):
        for key in ("id", "source", "surface_tokens"):
            if key not in entry:
                raise FormatError(f"{path}: manifest entry {i} lacks {key!r}")
    return entries


def write_manifest(path, entries: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=2)
        fh.write("\n")
