"""Byte-level checks for the interchange file writers and readers."""

import json
import struct

import numpy as np
import pytest

from encoder_bridge import BridgeFormatError
from encoder_bridge import formats


class TestLogitRecords:
    def test_byte_layout_matches_hand_packed_record(self, tmp_path):
        matrix = np.array([[1.5, -2.0, 0.25], [0.0, 3.0, -1.0]], dtype=np.float32)
        path = tmp_path / "one.hlgt"
        formats.write_logit_records(path, [matrix])

        expected = struct.pack("<4sIII", b"HLGT", 1, 2, 3) + matrix.astype("<f4").tobytes()
        assert path.read_bytes() == expected

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        mats = [rng.normal(size=(r, 5)).astype(np.float32) for r in (1, 4, 7)]
        path = tmp_path / "many.hlgt"
        assert formats.write_logit_records(path, mats) == 3

        back = formats.read_logit_records(path)
        assert len(back) == 3
        for a, b in zip(mats, back):
            assert a.dtype == b.dtype == np.float32
            assert a.tobytes() == b.tobytes()

    def test_empty_file_is_the_valid_empty_form(self, tmp_path):
        path = tmp_path / "none.hlgt"
        assert formats.write_logit_records(path, []) == 0
        assert path.read_bytes() == b""
        assert formats.read_logit_records(path) == []

    def test_rejects_non_2d_matrix(self, tmp_path):
        with pytest.raises(BridgeFormatError, match="2-D"):
            formats.write_logit_records(tmp_path / "bad.hlgt", [np.zeros(4)])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.hlgt"
        path.write_bytes(struct.pack("<4sIII", b"NOPE", 1, 1, 1) + b"\x00" * 4)
        with pytest.raises(BridgeFormatError, match="magic"):
            formats.read_logit_records(path)

    def test_future_version_rejected(self, tmp_path):
        path = tmp_path / "v9.hlgt"
        path.write_bytes(struct.pack("<4sIII", b"HLGT", 9, 1, 1) + b"\x00" * 4)
        with pytest.raises(BridgeFormatError, match="version 9"):
            formats.read_logit_records(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "cut.hlgt"
        path.write_bytes(struct.pack("<4sIII", b"HLGT", 1, 2, 2) + b"\x00" * 7)
        with pytest.raises(BridgeFormatError, match="ends early"):
            formats.read_logit_records(path)


class TestDenseMatrix:
    def test_byte_layout_matches_hand_packed_header(self, tmp_path):
        vecs = np.array([[0.5, 1.0], [2.0, -3.0]], dtype=np.float32)
        path = tmp_path / "d.dense"
        formats.write_dense_matrix(path, vecs)
        assert path.read_bytes() == struct.pack("<II", 2, 2) + vecs.astype("<f4").tobytes()

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        vecs = rng.normal(size=(6, 9)).astype(np.float32)
        path = tmp_path / "d.dense"
        formats.write_dense_matrix(path, vecs)
        assert formats.read_dense_matrix(path).tobytes() == vecs.tobytes()

    def test_zero_rows_keep_a_valid_header(self, tmp_path):
        path = tmp_path / "empty.dense"
        formats.write_dense_matrix(path, np.zeros((0, 8), dtype=np.float32))
        assert path.read_bytes() == struct.pack("<II", 0, 8)
        assert formats.read_dense_matrix(path).shape == (0, 8)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "tiny.dense"
        path.write_bytes(b"\x01\x02\x03")
        with pytest.raises(BridgeFormatError, match="header"):
            formats.read_dense_matrix(path)


class TestManifestAndVocab:
    def test_manifest_round_trip_preserves_extras(self, tmp_path):
        entries = [
            {"id": "a", "source": "review", "surface_tokens": ["nice", "mug"]},
            {"id": "b", "source": "cqa", "surface_tokens": [], "truncated": True},
        ]
        path = tmp_path / "m.json"
        formats.write_sidecar_manifest(path, entries)
        assert formats.read_sidecar_manifest(path) == entries

    def test_manifest_requires_core_keys(self, tmp_path):
        with pytest.raises(BridgeFormatError, match="surface_tokens"):
            formats.write_sidecar_manifest(tmp_path / "m.json", [{"id": "a", "source": "review"}])

    def test_manifest_must_be_an_array(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text('{"id": "a"}')
        with pytest.raises(BridgeFormatError, match="array"):
            formats.read_sidecar_manifest(path)

    def test_vocab_map_sorted_by_id_with_string_keys(self, tmp_path):
        path = tmp_path / "v.json"
        formats.write_vocab_map(path, {3: "mug", 1: "the", 2: "blue"})
        payload = json.loads(path.read_text())
        assert payload == {"1": "the", "2": "blue", "3": "mug"}
        assert list(payload) == ["1", "2", "3"]


class TestEngineRepsReader:
    def test_parses_lines_and_int_keys(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text(
            json.dumps(
                {"id": "x", "source": "review", "dense": [0.5], "sparse": {"7": 1.25}, "tokens": []}
            )
            + "\n\n"  # blank lines are skipped
            + json.dumps(
                {"id": "y", "source": "cqa", "dense": [1.0], "sparse": {}, "tokens": ["mug"]}
            )
            + "\n"
        )
        items = formats.read_engine_reps(path)
        assert [it["id"] for it in items] == ["x", "y"]
        assert items[0]["sparse"] == {7: 1.25}
        assert isinstance(next(iter(items[0]["sparse"])), int)

    def test_bad_json_names_the_line(self, tmp_path):
        path = tmp_path / "r.jsonl"
        good = json.dumps({"id": "x", "source": "osp", "dense": [], "sparse": {}, "tokens": []})
        path.write_text(good + "\n{oops\n")
        with pytest.raises(BridgeFormatError, match=":2"):
            formats.read_engine_reps(path)
