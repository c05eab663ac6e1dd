"""Turn texts into the engine's three input files (plus a vocabulary map).

``export`` writes, for an output prefix ``P``:

* ``P.hlgt`` — one logit record per text, in input order;
* ``P.dense`` — the matching summary vectors, same order;
* ``P.manifest.json`` — id/source/surface_tokens per record, with a
  ``"truncated": true`` warning flag on any text cut at ``max_len``;
* ``P.vocab.json`` — token id -> token string for the whole vocabulary,
  which the engine's explain subcommand can consume directly.

Outputs are a pure function of (texts, model weights, settings): re-running
an export produces byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import formats
from .encoder import DEFAULT_MAX_LEN, EncoderOutput, MlmEncoder, TextItem
from .errors import BridgeError


@dataclass(frozen=True)
class ExportConfig:
    """Settings controlling one export run."""

    model_id: str
    max_len: int = DEFAULT_MAX_LEN
    include_special_rows: bool = True
    batch_size: int = 16


@dataclass
class ExportResult:
    """Where the files went and what they contain."""

    logit_path: str
    dense_path: str
    manifest_path: str
    vocab_path: str
    item_count: int
    hidden_size: int
    vocab_size: int
    truncated_ids: list[str] = field(default_factory=list)


def export(items: list[TextItem], config: ExportConfig, output_prefix: str) -> ExportResult:
    """Encode all items and write the interchange files for the engine."""
    seen = set()
    for item in items:
        if item.item_id in seen:
            raise BridgeError(f"duplicate item id {item.item_id!r}")
        seen.add(item.item_id)

    encoder = MlmEncoder(
        config.model_id,
        max_len=config.max_len,
        include_special_rows=config.include_special_rows,
        batch_size=config.batch_size,
    )
    outputs = encoder.encode(items)
    return write_outputs(outputs, encoder, output_prefix)


def write_outputs(
    outputs: list[EncoderOutput], encoder: MlmEncoder, output_prefix: str
) -> ExportResult:
    """Serialize already-computed encoder outputs under the given prefix."""
    logit_path = f"{output_prefix}.hlgt"
    dense_path = f"{output_prefix}.dense"
    manifest_path = f"{output_prefix}.manifest.json"
    vocab_path = f"{output_prefix}.vocab.json"

    formats.write_logit_records(logit_path, (o.logit_matrix for o in outputs))
    if outputs:
        dense = np.stack([o.cls_vector for o in outputs])
    else:
        dense = np.zeros((0, encoder.hidden_size), dtype=np.float32)
    formats.write_dense_matrix(dense_path, dense)

    manifest = []
    truncated: list[str] = []
    for o in outputs:
        entry = {"id": o.item_id, "source": o.source, "surface_tokens": o.surface_tokens}
        if o.truncated:
            entry["truncated"] = True
            truncated.append(o.item_id)
        manifest.append(entry)
    formats.write_sidecar_manifest(manifest_path, manifest)
    formats.write_vocab_map(vocab_path, encoder.id_to_token())

    return ExportResult(
        logit_path=logit_path,
        dense_path=dense_path,
        manifest_path=manifest_path,
        vocab_path=vocab_path,
        item_count=len(outputs),
        hidden_size=encoder.hidden_size,
        vocab_size=encoder.vocab_size,
        truncated_ids=truncated,
    )


def read_text_items(path) -> list[TextItem]:
    """Load input texts from JSONL lines of {"id", "source", "text"}."""
    import json

    items: list[TextItem] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                items.append(TextItem(str(obj["id"]), str(obj["source"]), str(obj["text"])))
            except KeyError as exc:
                raise BridgeError(f"{path}:{lineno}: missing field {exc}") from exc
    return items
