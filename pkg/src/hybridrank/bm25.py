"""Okapi BM25 baseline over normalized text.

Normalization mirrors the candidate-preparation rules used for the hybrid
corpus: JSON attribute objects are flattened to comma-separated pairs,
dimension shorthand is spelled out in English, non-ASCII characters are
transliterated, and everything is lowercased.  The normalizer is idempotent.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError, ValidationError

# Dimension shorthand, applied in order.  Qualified patterns (length, width,
# height, depth) must run before the bare-unit fallbacks so the qualifier
# letter is still adjacent to the unit mark when matched.
DEFAULT_UNIT_RULES: list[tuple[str, str]] = [
    (r"(\d+(?:\.\d+)?)\s*(?:''|″|\")\s*l\b", r"length \1 inches"),
    (r"(\d+(?:\.\d+)?)\s*(?:''|″|\")\s*w\b", r"width \1 inches"),
    (r"(\d+(?:\.\d+)?)\s*(?:''|″|\")\s*h\b", r"height \1 inches"),
    (r"(\d+(?:\.\d+)?)\s*(?:''|″|\")\s*d\b", r"depth \1 inches"),
    (r"(\d+(?:\.\d+)?)\s*(?:'|′)\s*l\b", r"length \1 feet"),
    (r"(\d+(?:\.\d+)?)\s*(?:'|′)\s*w\b", r"width \1 feet"),
    (r"(\d+(?:\.\d+)?)\s*(?:'|′)\s*h\b", r"height \1 feet"),
    (r"(\d+(?:\.\d+)?)\s*(?:''|″|\")", r"\1 inches"),
    (r"(\d+(?:\.\d+)?)\s*(?:'|′)(?!\w)", r"\1 feet"),
]

_TOKEN = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class NormalizationRules:
    lowercase: bool = True
    unit_expansion: tuple[tuple[str, str], ...] = tuple(DEFAULT_UNIT_RULES)
    json_flatten: bool = True
    non_english_transliteration: bool = True


def _flatten_json_value(value) -> str:
    if isinstance(value, dict):
        return ", ".join(f"{k}: {_flatten_json_value(v)}" for k, v in value.items())
    if isinstance(value, list):
        return ", ".join(_flatten_json_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return str(value)


def _maybe_flatten_json(text: str) -> str:
    stripped = text.strip()
    if not stripped.startswith(("{", "[")):
        return text
    try:
        parsed = json.loads(stripped)
    except json.JSONDecodeError:
        return text
    if isinstance(parsed, (dict, list)):
        return _flatten_json_value(parsed)
    return text


def _transliterate(text: str) -> str:
    # NFKD splits accents off their base letters; anything still non-ASCII
    # afterwards is dropped (lossy by design).
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.encode("ascii", "ignore").decode("ascii")


def normalize(text: str, rules: NormalizationRules = NormalizationRules()) -> str:
    """Canonicalize a text: flatten, expand units, transliterate, lowercase.

    Deterministic and idempotent: normalizing twice equals normalizing once.
    """
    if rules.json_flatten:
        text = _maybe_flatten_json(text)
    if rules.unit_expansion:
        for pattern, replacement in rules.unit_expansion:
            text = re.sub(pattern, replacement, text, flags=re.IGNORECASE)
    if rules.non_english_transliteration:
        text = _transliterate(text)
    if rules.lowercase:
        text = text.lower()
    return " ".join(text.split())


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens, split on whitespace and punctuation."""
    return _TOKEN.findall(text.lower())


@dataclass
class CorpusStats:
    """Corpus-level term statistics needed by the scoring formula."""

    doc_count: int
    doc_freq: Counter
    doc_lengths: dict[str, int]
    avg_doc_length: float
    term_freqs: dict[str, Counter] = field(repr=False, default_factory=dict)

    @classmethod
    def build(cls, tokenized_docs: dict[str, list[str]]) -> "CorpusStats":
        if not tokenized_docs:
            raise ValidationError("cannot build corpus statistics from an empty corpus")
        doc_freq: Counter = Counter()
        term_freqs = {}
        doc_lengths = {}
        for doc_id, tokens in tokenized_docs.items():
            tf = Counter(tokens)
            term_freqs[doc_id] = tf
            doc_lengths[doc_id] = len(tokens)
            doc_freq.update(tf.keys())
        n = len(tokenized_docs)
        avg = sum(doc_lengths.values()) / n
        return cls(n, doc_freq, doc_lengths, avg, term_freqs)


def idf(term: str, stats: CorpusStats) -> float:
    # ln(1 + x) form keeps the score nonnegative even for very common terms.
    n_t = stats.doc_freq.get(term, 0)
    return math.log(1.0 + (stats.doc_count - n_t + 0.5) / (n_t + 0.5))


def bm25_score(
    query_terms: list[str],
    doc_id: str,
    stats: CorpusStats,
    k1: float = 1.5,
    b: float = 0.75,
) -> float:
    """Okapi BM25 score of one document for a tokenized query."""
    if k1 < 0:
        raise ConfigError(f"k1 must be >= 0, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise ConfigError(f"b must lie in [0, 1], got {b}")
    if doc_id not in stats.term_freqs:
        raise ValidationError(f"unknown document id {doc_id!r}")
    tf = stats.term_freqs[doc_id]
    length_ratio = stats.doc_lengths[doc_id] / stats.avg_doc_length if stats.avg_doc_length else 0.0
    score = 0.0
    for term in query_terms:
        freq = tf.get(term, 0)
        if freq == 0:
            continue
        denom = freq + k1 * (1.0 - b + b * length_ratio)
        score += idf(term, stats) * freq * (k1 + 1.0) / denom
    return score


def bm25_rank(
    query: str,
    corpus: dict[str, str],
    rules: NormalizationRules = NormalizationRules(),
    k1: float = 1.5,
    b: float = 0.75,
) -> list[tuple[str, float]]:
    """Rank every corpus document for a query string.

    Both sides pass through the normalizer and tokenizer.  Output is sorted
    by descending score with ties broken by ascending document id.
    """
    if not corpus:
        raise ValidationError("cannot rank over an empty corpus")
    stats = CorpusStats.build({doc_id: tokenize(normalize(text, rules)) for doc_id, text in corpus.items()})
    query_terms = tokenize(normalize(query, rules))
    scored = [(doc_id, bm25_score(query_terms, doc_id, stats, k1, b)) for doc_id in corpus]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored
