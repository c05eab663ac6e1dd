"""Shared fixtures: a tiny randomly initialized masked-LM saved to disk.

The model is seeded, two layers deep, and 32 wide, so inference is fast and
every test run reconstructs bit-identical weights.  The tokenizer is a
plain lowercase WordPiece over a closed household-products vocabulary,
which keeps test sentences free of [UNK] unless a test wants one.
"""

from __future__ import annotations

import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import itertools

import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

from encoder_bridge import MlmEncoder, TextItem

SPECIAL_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

FUNCTION_WORDS = [
    "the", "a", "an", "is", "are", "it", "this", "that", "with", "for",
    "and", "of", "in", "on", "very", "not", "well", "also", "but", "so",
    "too", "no", "my", "we", "you",
]

ADJECTIVES = [
    "red", "blue", "green", "white", "black", "small", "large", "light",
    "heavy", "new", "old", "good", "bright", "soft", "fast", "slow",
    "quiet", "solid", "warm", "thin", "cheap", "nice", "wireless", "long",
]

NOUNS = [
    "car", "vase", "lamp", "chair", "table", "shelf", "battery", "cable",
    "charger", "cotton", "ceramic", "wood", "metal", "glass", "plastic",
    "leather", "speed", "power", "color", "size", "weight", "box",
    "kitchen", "office", "desk", "phone", "laptop", "camera", "screen",
    "bottle", "blanket", "pillow", "towel", "jacket", "watch", "fan",
    "mug", "rug", "frame", "stand", "case", "cover", "strap", "clip",
    "hook", "bank", "pad",
]

VERBS = [
    "works", "fits", "holds", "looks", "feels", "runs", "lasts", "arrived",
    "broke", "shipped", "bought", "love", "like", "recommend", "returned",
    "charge", "charges", "wash", "clean", "drive", "goes", "matches",
]

QUESTION_WORDS = ["how", "what", "which", "does", "can", "will", "where", "why"]

WORD_PIECES = ["##s", "##ing", "##ed", "##er", "##ly"]

VOCAB_WORDS = (
    SPECIAL_TOKENS
    + FUNCTION_WORDS
    + ADJECTIVES
    + NOUNS
    + VERBS
    + QUESTION_WORDS
    + WORD_PIECES
)

HIDDEN_SIZE = 32
MODEL_SEED = 1234


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    """Build and save the tiny seeded MLM plus its tokenizer."""
    path = tmp_path_factory.mktemp("tiny-mlm")
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB_WORDS) + "\n", encoding="utf-8")

    torch.manual_seed(MODEL_SEED)
    config = BertConfig(
        vocab_size=len(VOCAB_WORDS),
        hidden_size=HIDDEN_SIZE,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=160,
    )
    model = BertForMaskedLM(config)
    model.eval()
    model.save_pretrained(path)
    tokenizer = BertTokenizer(vocab=str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def encoder(model_dir) -> MlmEncoder:
    """One shared encoder instance for tests that only read from it."""
    return MlmEncoder(model_dir)


def make_sentences(n: int = 100) -> list[str]:
    """Deterministic natural sentences drawn from the closed vocabulary."""
    combos = itertools.product(
        ADJECTIVES[:10],
        ["lamp", "battery", "vase", "blanket", "charger", "chair", "mug", "fan", "rug", "watch"],
        ["works well", "fits in the box", "holds its charge", "looks very nice",
         "feels too heavy", "arrived with a broken cover", "matches the kitchen table",
         "runs for a long time", "lasts and lasts", "charges the phone fast"],
    )
    picked = []
    for i, (adj, noun, tail) in enumerate(combos):
        if i % 7 == 0:  # skip around the grid so adjacent items differ more
            continue
        picked.append(f"the {adj} {noun} {tail}")
        if len(picked) == n:
            break
    return picked


def make_items(sentences: list[str], prefix: str = "t") -> list[TextItem]:
    """Wrap sentences as TextItems cycling through the engine's source tags."""
    sources = ["description", "review", "cqa", "attribute", "bullet", "osp"]
    return [
        TextItem(f"{prefix}{i}", sources[i % len(sources)], text)
        for i, text in enumerate(sentences)
    ]
