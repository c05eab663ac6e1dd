"""Export: files on disk, determinism, truncation warnings."""

import json

import numpy as np
import pytest

from encoder_bridge import (
    BridgeError,
    ExportConfig,
    MlmEncoder,
    TextItem,
    export,
    formats,
    read_text_items,
    write_outputs,
)

from conftest import HIDDEN_SIZE, VOCAB_WORDS, make_items


@pytest.fixture(scope="module")
def small_export(model_dir, tmp_path_factory):
    items = make_items(
        ["the red lamp works well", "soft cotton blanket", "does the battery charge the phone"]
    )
    prefix = tmp_path_factory.mktemp("exp") / "batch"
    result = export(items, ExportConfig(model_id=model_dir), str(prefix))
    return items, result


class TestExportedFiles:
    def test_result_reports_counts_and_dimensions(self, small_export):
        _, result = small_export
        assert result.item_count == 3
        assert result.hidden_size == HIDDEN_SIZE
        assert result.vocab_size == len(VOCAB_WORDS)
        assert result.truncated_ids == []

    def test_logit_records_one_per_item_with_vocab_columns(self, small_export):
        _, result = small_export
        mats = formats.read_logit_records(result.logit_path)
        assert len(mats) == 3
        for m in mats:
            assert m.shape[1] == len(VOCAB_WORDS)
            assert m.shape[0] >= 3  # [CLS] + content + [SEP]

    def test_dense_vectors_align_with_records(self, small_export):
        _, result = small_export
        dense = formats.read_dense_matrix(result.dense_path)
        assert dense.shape == (3, HIDDEN_SIZE)
        assert np.isfinite(dense).all()

    def test_manifest_mirrors_items_in_order(self, small_export):
        items, result = small_export
        manifest = formats.read_sidecar_manifest(result.manifest_path)
        assert [e["id"] for e in manifest] == [it.item_id for it in items]
        assert [e["source"] for e in manifest] == [it.source for it in items]
        assert manifest[0]["surface_tokens"] == ["the", "red", "lamp", "works", "well"]
        assert all("truncated" not in e for e in manifest)

    def test_vocab_map_file_covers_model_vocabulary(self, small_export):
        _, result = small_export
        payload = json.loads(open(result.vocab_path).read())
        assert len(payload) == len(VOCAB_WORDS)
        assert payload["0"] == "[PAD]"

    def test_export_matches_direct_encoder_output(self, small_export, encoder):
        items, result = small_export
        mats = formats.read_logit_records(result.logit_path)
        dense = formats.read_dense_matrix(result.dense_path)
        fresh = encoder.encode(items)
        for out, mat, vec in zip(fresh, mats, dense):
            assert out.logit_matrix.tobytes() == mat.tobytes()
            assert out.cls_vector.tobytes() == vec.tobytes()


class TestEdgeBehavior:
    def test_empty_input_writes_valid_empty_files(self, model_dir, tmp_path):
        result = export([], ExportConfig(model_id=model_dir), str(tmp_path / "none"))
        assert result.item_count == 0
        assert formats.read_logit_records(result.logit_path) == []
        assert formats.read_dense_matrix(result.dense_path).shape == (0, HIDDEN_SIZE)
        assert formats.read_sidecar_manifest(result.manifest_path) == []

    def test_rerun_is_byte_identical(self, model_dir, tmp_path):
        items = make_items(["the quiet fan runs for a long time", "cheap plastic mug"])
        config = ExportConfig(model_id=model_dir)
        first = export(items, config, str(tmp_path / "one"))
        second = export(items, config, str(tmp_path / "two"))
        for attr in ("logit_path", "dense_path", "manifest_path", "vocab_path"):
            a, b = getattr(first, attr), getattr(second, attr)
            assert open(a, "rb").read() == open(b, "rb").read(), attr

    def test_overlong_text_flagged_in_manifest(self, model_dir, tmp_path):
        items = [
            TextItem("short", "review", "nice mug"),
            TextItem("long", "review", " ".join(["lamp"] * 40)),
        ]
        config = ExportConfig(model_id=model_dir, max_len=8)
        result = export(items, config, str(tmp_path / "cut"))
        assert result.truncated_ids == ["long"]
        manifest = formats.read_sidecar_manifest(result.manifest_path)
        assert "truncated" not in manifest[0]
        assert manifest[1]["truncated"] is True
        mats = formats.read_logit_records(result.logit_path)
        assert mats[1].shape[0] == 8

    def test_duplicate_ids_rejected(self, model_dir, tmp_path):
        items = [TextItem("d0", "review", "a"), TextItem("d0", "cqa", "b")]
        with pytest.raises(BridgeError, match="duplicate"):
            export(items, ExportConfig(model_id=model_dir), str(tmp_path / "dup"))

    def test_write_outputs_reuses_a_loaded_encoder(self, encoder, tmp_path):
        items = make_items(["warm wood table"])
        outputs = encoder.encode(items)
        result = write_outputs(outputs, encoder, str(tmp_path / "reuse"))
        assert result.item_count == 1
        assert formats.read_dense_matrix(result.dense_path).shape == (1, HIDDEN_SIZE)


class TestReadTextItems:
    def test_reads_jsonl_skipping_blanks(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text(
            json.dumps({"id": "a", "source": "review", "text": "hi"})
            + "\n\n"
            + json.dumps({"id": "b", "source": "cqa", "text": "yo"})
            + "\n"
        )
        items = read_text_items(path)
        assert [(i.item_id, i.source, i.text) for i in items] == [
            ("a", "review", "hi"),
            ("b", "cqa", "yo"),
        ]

    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text(json.dumps({"id": "a", "source": "review"}) + "\n")
        with pytest.raises(BridgeError, match=":1"):
            read_text_items(path)

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text("{nope\n")
        with pytest.raises(BridgeError, match=":1"):
            read_text_items(path)
