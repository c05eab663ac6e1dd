"""Relevance scoring: dense, lexical, and interpolated matching.

The combined score of a candidate is an alpha-weighted sum of two inner
products: the dense vectors' and the sparse representations'.  Ranking sorts
by combined score, breaking ties by ascending candidate id so identical
inputs always produce identical output.  A source-aware variant min-max
normalizes both score components per query and multiplies the interpolated
score by a per-source prior confidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .representations import SparseRep

SOURCE_TAGS = ("attribute", "bullet", "cqa", "description", "osp", "review", "other")

NORMALIZATION_MODES = ("none", "min_max_per_query")


def validate_source(tag: str) -> str:
    tag = tag.lower()
    if tag not in SOURCE_TAGS:
        raise ValidationError(f"unknown source tag {tag!r}; expected one of {SOURCE_TAGS}")
    return tag


@dataclass(frozen=True)
class ScoringConfig:
    """Interpolation weight, optional per-source priors, and normalization mode."""

    alpha: float = 0.5
    source_priors: dict[str, float] | None = None
    normalization: str = "none"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.normalization not in NORMALIZATION_MODES:
            raise ConfigError(
                f"normalization must be one of {NORMALIZATION_MODES}, got {self.normalization!r}"
            )
        if self.source_priors is not None:
            for source, prior in self.source_priors.items():
                if prior <= 0:
                    raise ConfigError(f"source prior for {source!r} must be > 0, got {prior}")


@dataclass
class ScoredCandidate:
    candidate_id: str
    dense_score: float
    lexical_score: float
    combined: float
    source: str = "other"


def dot_dense(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of two dense vectors, accumulated in float64."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"dense vectors differ in shape: {a.shape} vs {b.shape}")
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


def dot_sparse(a: SparseRep, b: SparseRep) -> float:
    """Inner product over shared token ids (merge of the two sorted id lists)."""
    if a.nnz == 0 or b.nnz == 0:
        return 0.0
    _, ia, ib = np.intersect1d(a.token_ids, b.token_ids, assume_unique=True, return_indices=True)
    if len(ia) == 0:
        return 0.0
    return float(
        np.dot(a.weights[ia].astype(np.float64), b.weights[ib].astype(np.float64))
    )


def hybrid_score(
    q_dense: np.ndarray,
    q_sparse: SparseRep,
    c_dense: np.ndarray,
    c_sparse: SparseRep,
    alpha: float,
) -> tuple[float, float, float]:
    """Return (dense_score, lexical_score, combined) for one query/candidate pair."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    dense_score = dot_dense(q_dense, c_dense)
    lexical_score = dot_sparse(q_sparse, c_sparse)
    combined = alpha * dense_score + (1.0 - alpha) * lexical_score
    return dense_score, lexical_score, combined


def rank(query, candidates, cfg: ScoringConfig) -> list[ScoredCandidate]:
    """Score every candidate against the query and sort.

    Order is descending combined score with ties broken by ascending
    candidate id; every input candidate appears exactly once.
    """
    scored = []
    for cand in candidates:
        try:
            ds, ls, comb = hybrid_score(
                query.dense, query.sparse, cand.dense, cand.sparse, cfg.alpha
            )
        except DimensionError as exc:
            raise DimensionError(f"candidate {cand.id!r}: {exc}") from None
        scored.append(ScoredCandidate(cand.id, ds, ls, comb, cand.source))
    scored.sort(key=lambda s: (-s.combined, s.candidate_id))
    return scored


def _min_max(values: list[float]) -> list[float]:
    # Degenerate spread maps every candidate to 0.5 so priors stay decisive.
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def source_aware_rescale(scored: list[ScoredCandidate], cfg: ScoringConfig) -> list[ScoredCandidate]:
    """Re-rank with per-source prior confidence.

    Dense and lexical scores are min-max normalized to [0, 1] across the
    candidate list, interpolated with cfg.alpha, and multiplied by the prior
    of the candidate's source.  A missing prior is an error, never a silent
    default.
    """
    if cfg.source_priors is None:
        raise ConfigError("source_aware_rescale requires source_priors in the config")
    if cfg.normalization != "min_max_per_query":
        raise ConfigError(
            "source_aware_rescale requires normalization='min_max_per_query', "
            f"got {cfg.normalization!r}"
        )
    if not scored:
        return []
    for cand in scored:
        if cand.source not in cfg.source_priors:
            raise ValidationError(f"no source prior supplied for source {cand.source!r}")
    dense_norm = _min_max([c.dense_score for c in scored])
    lex_norm = _min_max([c.lexical_score for c in scored])
    rescored = [
        ScoredCandidate(
            c.candidate_id,
            dn,
            ln,
            cfg.source_priors[c.source] * (cfg.alpha * dn + (1.0 - cfg.alpha) * ln),
            c.source,
        )
        for c, dn, ln in zip(scored, dense_norm, lex_norm)
    ]
    rescored.sort(key=lambda s: (-s.combined, s.candidate_id))
    return rescored


def format_trec_run(query_id: str, scored: list[ScoredCandidate], tag: str = "hybridrank") -> list[str]:
    """TREC run lines: qid Q0 candidate_id rank score tag (score to 6 decimals)."""
    return [
        f"{query_id} Q0 {c.candidate_id} {i} {c.combined:.6f} {tag}"
        for i, c in enumerate(scored, start=1)
    ]
