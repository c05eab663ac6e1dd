"""Persistent hybrid index: inverted postings over sparse tokens plus a
contiguous dense-vector store.

A built index is immutable.  Queries combine an exact dense scan (a single
matrix-vector product) with a merge of the query's posting lists, producing
exactly the same ranking as brute-force scoring over every stored entry.

On-disk layout (single file, little-endian):

    magic "HIDX" | u32 version
    3 sections, each:  u32 section id | u64 payload length | payload | u32 CRC32

Section 1 is a JSON metadata blob (ids, sources, dims, per-entry sparsity),
section 2 the raw float32 dense matrix, section 3 the per-entry sparse data.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChecksumError,
    DimensionError,
    FormatError,
    TruncatedFileError,
    ValidationError,
    VersionError,
)
from .representations import SparseRep
from .scoring import ScoredCandidate, ScoringConfig, validate_source

INDEX_MAGIC = b"HIDX"
INDEX_VERSION = 1

_SECTION_META = 1
_SECTION_DENSE = 2
_SECTION_SPARSE = 3


@dataclass
class HybridEntry:
    """One indexed item: id, source tag, dense vector, sparse representation."""

    id: str
    source: str
    dense: np.ndarray
    sparse: SparseRep
    surface_tokens: list[str] | None = None

    def __post_init__(self):
        self.source = validate_source(self.source)
        self.dense = np.asarray(self.dense, dtype=np.float32)
        if self.dense.ndim != 1:
            raise ValidationError(f"entry {self.id!r}: dense vector must be 1-D")

    @classmethod
    def from_dict(cls, obj: dict) -> "HybridEntry":
        return cls(
            id=str(obj["id"]),
            source=obj.get("source", "other"),
            dense=np.asarray(obj["dense"], dtype=np.float32),
            sparse=SparseRep.from_dict(obj.get("sparse", {})),
            surface_tokens=obj.get("tokens"),
        )

    def to_dict(self) -> dict:
        obj = {
            "id": self.id,
            "source": self.source,
            "dense": [float(v) for v in self.dense],
            "sparse": self.sparse.to_dict(),
        }
        if self.surface_tokens is not None:
            obj["tokens"] = list(self.surface_tokens)
        return obj


def read_entries_jsonl(path) -> list[HybridEntry]:
    """Read representation-interchange JSONL, one entry object per line."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_no}: invalid JSON ({exc})") from None
            entries.append(HybridEntry.from_dict(obj))
    return entries


def write_entries_jsonl(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict()) + "\n")


class HybridIndex:
    """Immutable queryable collection of HybridEntry items.

    Entries are held in ascending-id order; the dense store row i belongs to
    entry i.  Postings map token_id to (entry row, weight) pairs sorted by
    row, which is also ascending entry id.
    """

    def __init__(self, entries: list[HybridEntry], vocab_size: int | None = None,
                 k: int | None = None, config: dict | None = None):
        entries = sorted(entries, key=lambda e: e.id)
        seen = set()
        for entry in entries:
            if entry.id in seen:
                raise ValidationError(f"duplicate entry id {entry.id!r}")
            seen.add(entry.id)
        if entries:
            h = len(entries[0].dense)
            for entry in entries:
                if len(entry.dense) != h:
                    raise DimensionError(
                        f"entry {entry.id!r}: dense length {len(entry.dense)} != {h}"
                    )
        else:
            h = 0
        max_token = max((int(e.sparse.token_ids.max()) for e in entries if e.sparse.nnz), default=-1)
        if vocab_size is None:
            vocab_size = max_token + 1
        elif max_token >= vocab_size:
            raise DimensionError(
                f"token id {max_token} exceeds declared vocab size {vocab_size}"
            )
        if k is None:
            k = max((e.sparse.k_limit for e in entries), default=0)

        self.entries = entries
        self.h = h
        self.vocab_size = vocab_size
        self.k = k
        self.config = dict(config or {})
        self._by_id = {e.id: e for e in entries}
        # float64 compute copy keeps query() within 1e-6 of brute-force scoring
        self._dense = np.array([e.dense for e in entries], dtype=np.float64).reshape(len(entries), h)
        self._postings: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        rows_by_token: dict[int, list[int]] = {}
        weights_by_token: dict[int, list[float]] = {}
        for row, entry in enumerate(entries):
            for t, w in zip(entry.sparse.token_ids, entry.sparse.weights):
                rows_by_token.setdefault(int(t), []).append(row)
                weights_by_token.setdefault(int(t), []).append(float(w))
        for t in rows_by_token:
            self._postings[t] = (
                np.asarray(rows_by_token[t], dtype=np.int64),
                np.asarray(weights_by_token[t], dtype=np.float64),
            )

    def __len__(self) -> int:
        return len(self.entries)

    def postings(self, token_id: int) -> list[tuple[str, float]]:
        """(entry id, weight) pairs for a token, sorted by entry id."""
        rows, weights = self._postings.get(int(token_id), (np.empty(0, dtype=np.int64), np.empty(0)))
        return [(self.entries[r].id, float(w)) for r, w in zip(rows, weights)]

    def query(
        self,
        q: HybridEntry,
        cfg: ScoringConfig,
        top_n: int | None = None,
        sources: set[str] | None = None,
    ) -> list[ScoredCandidate]:
        """Rank stored entries against a query, truncated to top_n.

        Matches brute-force scoring over the full entry list: same permutation,
        scores within float64 round-off.  `sources` optionally restricts the
        candidate pool to the given source tags.
        """
        n = len(self.entries)
        if n == 0:
            return []
        if len(q.dense) != self.h:
            raise DimensionError(f"query dense length {len(q.dense)} != index h {self.h}")
        # Query tokens beyond every stored posting simply match nothing.
        dense_scores = self._dense @ q.dense.astype(np.float64)
        lexical_scores = np.zeros(n)
        for t, qw in zip(q.sparse.token_ids, q.sparse.weights):
            hit = self._postings.get(int(t))
            if hit is not None:
                rows, weights = hit
                lexical_scores[rows] += float(qw) * weights
        combined = cfg.alpha * dense_scores + (1.0 - cfg.alpha) * lexical_scores

        order = np.argsort(-combined, kind="stable")  # rows are id-sorted: stable = id tie-break
        if sources is not None:
            order = [r for r in order if self.entries[r].source in sources]
        if top_n is not None:
            order = order[:top_n]
        return [
            ScoredCandidate(
                self.entries[r].id,
                float(dense_scores[r]),
                float(lexical_scores[r]),
                float(combined[r]),
                self.entries[r].source,
            )
            for r in order
        ]

    def get(self, entry_id: str) -> HybridEntry:
        try:
            return self._by_id[entry_id]
        except KeyError:
            raise ValidationError(f"no entry with id {entry_id!r}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, HybridIndex):
            return NotImplemented
        if (self.h, self.vocab_size, self.k, self.config) != (other.h, other.vocab_size, other.k, other.config):
            return False
        if len(self.entries) != len(other.entries):
            return False
        for a, b in zip(self.entries, other.entries):
            if (a.id, a.source, a.surface_tokens) != (b.id, b.source, b.surface_tokens):
                return False
            if a.dense.tobytes() != b.dense.tobytes():
                return False
            if a.sparse != b.sparse:
                return False
        return True


def build(entries: list[HybridEntry], vocab_size: int | None = None,
          k: int | None = None, config: dict | None = None) -> HybridIndex:
    """Construct an immutable index from dimension-consistent entries."""
    return HybridIndex(entries, vocab_size=vocab_size, k=k, config=config)


def _write_section(fh, section_id: int, payload: bytes) -> None:
    fh.write(struct.pack("<IQ", section_id, len(payload)))
    fh.write(payload)
    fh.write(struct.pack("<I", zlib.crc32(payload)))


def save(idx: HybridIndex, path) -> None:
    """Serialize to the sectioned single-file format; the index is untouched."""
    meta = {
        "h": idx.h,
        "vocab_size": idx.vocab_size,
        "k": idx.k,
        "config": idx.config,
        "count": len(idx.entries),
        "ids": [e.id for e in idx.entries],
        "sources": [e.source for e in idx.entries],
        "k_limits": [e.sparse.k_limit for e in idx.entries],
        "surface_tokens": [e.surface_tokens for e in idx.entries],
    }
    meta_payload = json.dumps(meta).encode("utf-8")

    dense = np.array([e.dense for e in idx.entries], dtype="<f4").reshape(len(idx.entries), idx.h)
    dense_payload = dense.tobytes(order="C")

    parts = []
    for entry in idx.entries:
        parts.append(struct.pack("<I", entry.sparse.nnz))
        parts.append(entry.sparse.token_ids.astype("<u4").tobytes())
        parts.append(entry.sparse.weights.astype("<f4").tobytes())
    sparse_payload = b"".join(parts)

    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<I", INDEX_VERSION))
        _write_section(fh, _SECTION_META, meta_payload)
        _write_section(fh, _SECTION_DENSE, dense_payload)
        _write_section(fh, _SECTION_SPARSE, sparse_payload)


def _read_section(data: bytes, offset: int, path) -> tuple[int, bytes, int]:
    if len(data) - offset < 12:
        raise TruncatedFileError(f"{path}: truncated section header at byte {offset}")
    section_id, length = struct.unpack_from("<IQ", data, offset)
    offset += 12
    if len(data) - offset < length + 4:
        raise TruncatedFileError(
            f"{path}: section {section_id} declares {length} bytes but file ends early"
        )
    payload = data[offset:offset + length]
    offset += length
    (crc,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: checksum mismatch in section {section_id}")
    return section_id, payload, offset


def load(path) -> HybridIndex:
    """Read an index file; the result is structurally identical to what was saved."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise TruncatedFileError(f"{path}: file too short for index header")
    if data[:4] != INDEX_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, not an index file")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != INDEX_VERSION:
        raise VersionError(f"{path}: unsupported index version {version}")

    offset = 8
    sections: dict[int, bytes] = {}
    while offset < len(data):
        section_id, payload, offset = _read_section(data, offset, path)
        sections[section_id] = payload
    for required in (_SECTION_META, _SECTION_DENSE, _SECTION_SPARSE):
        if required not in sections:
            raise FormatError(f"{path}: missing section {required}")

    meta = json.loads(sections[_SECTION_META].decode("utf-8"))
    count, h = meta["count"], meta["h"]
    dense = np.frombuffer(sections[_SECTION_DENSE], dtype="<f4")
    if dense.size != count * h:
        raise FormatError(f"{path}: dense section holds {dense.size} floats, expected {count * h}")
    dense = dense.reshape(count, h)

    sparse_data = sections[_SECTION_SPARSE]
    entries = []
    pos = 0
    for i in range(count):
        if len(sparse_data) - pos < 4:
            raise TruncatedFileError(f"{path}: sparse section ends inside entry {i}")
        (nnz,) = struct.unpack_from("<I", sparse_data, pos)
        pos += 4
        need = nnz * 8
        if len(sparse_data) - pos < need:
            raise TruncatedFileError(f"{path}: sparse section ends inside entry {i}")
        ids = np.frombuffer(sparse_data, dtype="<u4", count=nnz, offset=pos).astype(np.int32)
        pos += nnz * 4
        weights = np.frombuffer(sparse_data, dtype="<f4", count=nnz, offset=pos).copy()
        pos += nnz * 4
        entries.append(
            HybridEntry(
                id=meta["ids"][i],
                source=meta["sources"][i],
                dense=dense[i].copy(),
                sparse=SparseRep(ids, weights, meta["k_limits"][i]),
                surface_tokens=meta["surface_tokens"][i],
            )
        )
    return HybridIndex(entries, vocab_size=meta["vocab_size"], k=meta["k"], config=meta["config"])
