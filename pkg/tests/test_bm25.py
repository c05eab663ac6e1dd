"""Text normalization and Okapi scoring tests.

The straight-loop reference scorer at the top recomputes BM25 from the
printed formula with no shared code.
"""

import math

import pytest

from hybridrank.bm25 import (
    CorpusStats,
    NormalizationRules,
    bm25_rank,
    bm25_score,
    idf,
    normalize,
    tokenize,
)
from hybridrank.errors import ConfigError, ValidationError


def reference_score(query_terms, doc_tokens, all_docs, k1=1.5, b=0.75):
    """Independent BM25: idf = ln(1 + (N - n_t + 0.5)/(n_t + 0.5))."""
    n_docs = len(all_docs)
    avg_len = sum(len(d) for d in all_docs) / n_docs
    score = 0.0
    for term in query_terms:
        freq = doc_tokens.count(term)
        if freq == 0:
            continue
        n_t = sum(1 for d in all_docs if term in d)
        term_idf = math.log(1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5))
        score += term_idf * freq * (k1 + 1.0) / (freq + k1 * (1.0 - b + b * len(doc_tokens) / avg_len))
    return score


class TestNormalize:
    def test_dimension_shorthand_expansion(self):
        assert normalize("3'' l x 4'' w") == "length 3 inches x width 4 inches"

    def test_feet_and_height(self):
        assert normalize("6' h shelf, 2.5'' d") == "height 6 feet shelf, depth 2.5 inches"

    def test_bare_units(self):
        assert normalize('12" TV stand') == "12 inches tv stand"

    def test_json_attribute_flattening(self):
        rules = NormalizationRules(lowercase=False)
        assert normalize('{"color":"red","size":"XL"}', rules) == "color: red, size: XL"

    def test_nested_json(self):
        out = normalize('{"dims": {"w": 3, "h": 4}, "tags": ["new", "sale"]}')
        assert out == "dims: w: 3, h: 4, tags: new, sale"

    def test_invalid_json_left_alone(self):
        assert normalize("{not json at all") == "{not json at all"

    def test_transliteration(self):
        assert normalize("Café Décor – Žluťoučký") == "cafe decor zlutoucky"

    def test_canonical_text_unchanged(self):
        text = "plain ascii text already normalized"
        assert normalize(text) == text

    def test_idempotent(self):
        cases = [
            "3'' l x 4'' w",
            '{"color":"red","size":"XL"}',
            "Café 12″ Ständer",
            "  spaced\tout\ntext  ",
            "5′ w beam",
        ]
        for text in cases:
            once = normalize(text)
            assert normalize(once) == once

    def test_rules_are_independent(self):
        no_translit = NormalizationRules(non_english_transliteration=False)
        assert "é" in normalize("café", no_translit)
        no_units = NormalizationRules(unit_expansion=())
        assert "''" in normalize("3'' l", no_units)

    def test_whitespace_collapse(self):
        assert normalize("a   b \t c\n\nd") == "a b c d"


class TestTokenize:
    def test_splits_on_punctuation(self):
        assert tokenize("red, fast-car!") == ["red", "fast", "car"]

    def test_lowercases(self):
        assert tokenize("Red CAR") == ["red", "car"]

    def test_empty(self):
        assert tokenize("...") == []


class TestCorpusStats:
    def test_counts(self):
        stats = CorpusStats.build({"d1": ["a", "b", "a"], "d2": ["b", "c"]})
        assert stats.doc_count == 2
        assert stats.doc_freq["a"] == 1
        assert stats.doc_freq["b"] == 2
        assert stats.avg_doc_length == 2.5
        assert stats.doc_lengths == {"d1": 3, "d2": 2}

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            CorpusStats.build({})


class TestBm25Score:
    def test_absent_terms_score_zero(self):
        stats = CorpusStats.build({"d1": ["apple", "pie"]})
        assert bm25_score(["banana"], "d1", stats) == 0.0

    def test_single_doc_closed_form(self):
        """One doc, term once, length = average: the tf factor cancels to 1
        and the score is the bare idf, ln(1 + 0.5/1.5) = ln(4/3)."""
        stats = CorpusStats.build({"d1": ["widget"]})
        assert bm25_score(["widget"], "d1", stats) == pytest.approx(math.log(4.0 / 3.0), abs=1e-12)

    def test_matches_reference_on_random_corpus(self):
        import random

        rnd = random.Random(81)
        vocab = [f"t{i}" for i in range(12)]
        docs = {f"d{i}": [rnd.choice(vocab) for _ in range(rnd.randint(2, 12))] for i in range(8)}
        stats = CorpusStats.build(docs)
        all_docs = list(docs.values())
        for _ in range(30):
            query = [rnd.choice(vocab) for _ in range(rnd.randint(1, 4))]
            doc_id = rnd.choice(list(docs))
            got = bm25_score(query, doc_id, stats)
            want = reference_score(query, docs[doc_id], all_docs)
            assert got == pytest.approx(want, abs=1e-9)

    def test_additive_over_query_terms(self):
        stats = CorpusStats.build({"d1": ["a", "b", "c"], "d2": ["a"]})
        lhs = bm25_score(["a", "b"], "d1", stats)
        rhs = bm25_score(["a"], "d1", stats) + bm25_score(["b"], "d1", stats)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_idf_never_negative(self):
        stats = CorpusStats.build({f"d{i}": ["common"] for i in range(50)})
        assert idf("common", stats) > 0.0

    def test_unknown_document_rejected(self):
        stats = CorpusStats.build({"d1": ["a"]})
        with pytest.raises(ValidationError):
            bm25_score(["a"], "ghost", stats)

    def test_parameter_validation(self):
        stats = CorpusStats.build({"d1": ["a"]})
        with pytest.raises(ConfigError):
            bm25_score(["a"], "d1", stats, k1=-0.1)
        with pytest.raises(ConfigError):
            bm25_score(["a"], "d1", stats, b=1.5)


class TestBm25Rank:
    def test_exact_copy_ranks_first(self):
        corpus = {
            "copy": "blue ceramic vase",
            "other1": "wooden chair",
            "other2": "steel lamp",
        }
        out = bm25_rank("blue ceramic vase", corpus)
        assert out[0][0] == "copy"

    def test_empty_query_is_id_ordered_zeros(self):
        corpus = {"b": "text one", "a": "text two", "c": "text three"}
        out = bm25_rank("???", corpus)
        assert [doc_id for doc_id, _ in out] == ["a", "b", "c"]
        assert all(score == 0.0 for _, score in out)

    def test_five_doc_fixture_ordering(self):
        """More matched query terms and rarer terms rank higher."""
        corpus = {
            "d1": "red fast car",
            "d2": "red car",
            "d3": "red bicycle",
            "d4": "blue boat",
            "d5": "red red red red red boat",
        }
        out = bm25_rank("red fast car", corpus)
        ids = [doc_id for doc_id, _ in out]
        assert ids[0] == "d1"  # all three terms
        assert ids[1] == "d2"  # two terms
        assert set(ids[2:4]) == {"d3", "d5"}  # one common term each
        assert ids[4] == "d4"  # no overlap
        assert out[4][1] == 0.0

    def test_normalization_applied_to_both_sides(self):
        corpus = {"d1": 'shelf 3\'\' l', "d2": "shelf"}
        out = bm25_rank("length 3 inches", corpus)
        assert out[0][0] == "d1"
        assert out[0][1] > 0.0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            bm25_rank("query", {})
