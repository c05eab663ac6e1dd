"""Masked-LM inference: per-token vocabulary logits plus a summary vector.

Any model loadable through ``AutoModelForMaskedLM`` works as long as it has
an MLM head over its vocabulary.  For every input text the encoder returns
the full ``|T| x |V|`` logit matrix (one row per kept token position) and
the final-layer hidden state at the first-token summary position as the
dense vector.

Structural special tokens ([CLS], [SEP], [PAD], [MASK]) never appear in
``surface_tokens``; their logit rows are kept by default so the downstream
max-pool sees every non-padding position, and ``include_special_rows=False``
drops them from the matrix as well.  [UNK] counts as surface content — it
occupies a real text position — so it is kept in both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer
from transformers import logging as hf_logging

from .errors import BridgeError

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

DEFAULT_MAX_LEN = 128


@dataclass(frozen=True)
class TextItem:
    """One unit of input text with its identity and origin tag."""

    item_id: str
    source: str
    text: str


@dataclass
class EncoderOutput:
    """Everything the encoder produces for one text."""

    item_id: str
    source: str
    cls_vector: np.ndarray = field(repr=False)  # (h,) float32
    logit_matrix: np.ndarray = field(repr=False)  # (|T|, |V|) float32
    surface_tokens: list[str] = field(default_factory=list)
    truncated: bool = False


class MlmEncoder:
    """Loads a masked-LM once and encodes batches of texts with it."""

    def __init__(
        self,
        model_id: str,
        max_len: int = DEFAULT_MAX_LEN,
        include_special_rows: bool = True,
        batch_size: int = 16,
    ):
        if max_len < 3:
            raise BridgeError(f"max_len must leave room for content tokens, got {max_len}")
        if batch_size < 1:
            raise BridgeError(f"batch_size must be >= 1, got {batch_size}")
        self.model_id = model_id
        self.max_len = max_len
        self.include_special_rows = include_special_rows
        self.batch_size = batch_size
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModelForMaskedLM.from_pretrained(model_id)
        except Exception as exc:  # transformers raises a zoo of types here
            raise BridgeError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()
        # Structural markers the tokenizer inserts around/outside the text.
        self._structural_ids = {
            tid
            for tid in (
                self.tokenizer.cls_token_id,
                self.tokenizer.sep_token_id,
                self.tokenizer.pad_token_id,
                self.tokenizer.mask_token_id,
            )
            if tid is not None
        }

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    @property
    def vocab_size(self) -> int:
        return int(self.model.config.vocab_size)

    def id_to_token(self) -> dict[int, str]:
        """Invert the tokenizer's vocabulary map."""
        return {tid: tok for tok, tid in self.tokenizer.get_vocab().items()}

    def encode(self, items: list[TextItem]) -> list[EncoderOutput]:
        """Run inference over all items, in input order."""
        outputs: list[EncoderOutput] = []
        for start in range(0, len(items), self.batch_size):
            outputs.extend(self._encode_batch(items[start : start + self.batch_size]))
        return outputs

    def _encode_batch(self, batch: list[TextItem]) -> list[EncoderOutput]:
        texts = [item.text for item in batch]
        enc = self.tokenizer(
            texts,
            padding=True,
            truncation=True,
            max_length=self.max_len,
            return_tensors="pt",
        )
        with torch.inference_mode():
            out = self.model(**enc, output_hidden_states=True)
        logits = out.logits  # (B, T, |V|)
        last_hidden = out.hidden_states[-1]  # (B, T, h)

        results = []
        for i, item in enumerate(batch):
            true_len = int(enc["attention_mask"][i].sum().item())
            ids = enc["input_ids"][i, :true_len].tolist()
            keep = [
                j
                for j, tid in enumerate(ids)
                if self.include_special_rows or tid not in self._structural_ids
            ]
            if not keep:
                raise BridgeError(
                    f"item {item.item_id!r} produced no logit rows; "
                    "text has no content tokens and special rows are excluded"
                )
            matrix = logits[i, keep].to(torch.float32).numpy().copy()
            cls_vec = last_hidden[i, 0].to(torch.float32).numpy().copy()
            surface = self.tokenizer.convert_ids_to_tokens(
                [tid for tid in ids if tid not in self._structural_ids]
            )
            truncated = self._was_truncated(item.text, true_len)
            results.append(
                EncoderOutput(
                    item_id=item.item_id,
                    source=item.source,
                    cls_vector=cls_vec,
                    logit_matrix=matrix,
                    surface_tokens=surface,
                    truncated=truncated,
                )
            )
        return results

    def _was_truncated(self, text: str, kept_len: int) -> bool:
        if kept_len < self.max_len:
            return False
        full = self.tokenizer(text, truncation=False)["input_ids"]
        return len(full) > self.max_len
