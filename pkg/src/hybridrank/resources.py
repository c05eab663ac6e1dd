"""Analytical cost model for the five ranking schemes, plus wall-clock
latency measurement of the hybrid engine.

Interaction cost counts the floating-point operations needed to score one
query/candidate pair; storage counts scalars kept per candidate offline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import ConfigError, NotApplicableError, ValidationError

SCHEMES = (
    "cross_encoder",
    "independent_dense",
    "late_interaction",
    "sparse_lexical",
    "hybrid",
)

INTERACTION_FORMULAS = {
    "independent_dense": "2h",
    "late_interaction": "2n^2*h + n",
    "sparse_lexical": "2k",
    "hybrid": "2(h + k)",
}

STORAGE_FORMULAS = {
    "independent_dense": "h",
    "late_interaction": "n*h",
    "sparse_lexical": "2k",
    "hybrid": "h + 2k",
}


@dataclass(frozen=True)
class CostModelParams:
    h: int = 768
    n: int = 128
    k: int = 128
    scheme: str = "hybrid"

    def __post_init__(self):
        if self.h < 1 or self.n < 1 or self.k < 1:
            raise ConfigError("h, n, and k must all be positive")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


def interaction_flops(p: CostModelParams) -> int:
    """Score-time FLOPs per query/candidate pair for the given scheme."""
    if p.scheme == "cross_encoder":
        raise NotApplicableError("cross_encoder has no separate interaction step")
    if p.scheme == "independent_dense":
        return 2 * p.h
    if p.scheme == "late_interaction":
        return 2 * p.n * p.n * p.h + p.n
    if p.scheme == "sparse_lexical":
        return 2 * p.k
    return 2 * (p.h + p.k)


def storage_per_item(p: CostModelParams) -> int:
    """Scalars stored offline per candidate (ids count as one scalar each)."""
    if p.scheme == "cross_encoder":
        raise NotApplicableError("cross_encoder stores no offline representation")
    if p.scheme == "independent_dense":
        return p.h
    if p.scheme == "late_interaction":
        return p.n * p.h
    if p.scheme == "sparse_lexical":
        return 2 * p.k
    return p.h + 2 * p.k


def cost_table(h: int = 768, n: int = 128, k: int = 128) -> list[dict]:
    """One row per scheme with symbolic formulas and evaluated counts."""
    rows = []
    for scheme in SCHEMES:
        params = CostModelParams(h=h, n=n, k=k, scheme=scheme)
        row: dict = {"scheme": scheme, "h": h, "n": n, "k": k}
        if scheme == "cross_encoder":
            row.update(
                interaction_formula=None,
                interaction_flops=None,
                storage_formula=None,
                storage_per_item=None,
            )
        else:
            row.update(
                interaction_formula=INTERACTION_FORMULAS[scheme],
                interaction_flops=interaction_flops(params),
                storage_formula=STORAGE_FORMULAS[scheme],
                storage_per_item=storage_per_item(params),
            )
        rows.append(row)
    return rows


@dataclass
class LatencyReport:
    per_query_ms: float
    per_candidate_ms: float | None
    repetitions: int
    query_count: int
    candidate_count: int


def measure_latency(idx, queries, cfg, top_n: int | None = None, repetitions: int = 3) -> LatencyReport:
    """Mean wall-clock ranking time per query over warm repetitions.

    One untimed warm-up pass precedes the measurement.  Encoding time is
    excluded: representations arrive precomputed.
    """
    if repetitions < 3:
        raise ConfigError(f"need at least 3 repetitions, got {repetitions}")
    queries = list(queries)
    if not queries:
        raise ValidationError("measure_latency needs a nonempty query set")
    for q in queries:  # warm-up
        idx.query(q, cfg, top_n=top_n)
    elapsed = 0.0
    for _ in range(repetitions):
        start = time.perf_counter()
        for q in queries:
            idx.query(q, cfg, top_n=top_n)
        elapsed += time.perf_counter() - start
    per_query_ms = elapsed / (repetitions * len(queries)) * 1000.0
    candidates = len(idx)
    per_candidate = per_query_ms / candidates if candidates else None
    return LatencyReport(
        per_query_ms=per_query_ms,
        per_candidate_ms=per_candidate,
        repetitions=repetitions,
        query_count=len(queries),
        candidate_count=candidates,
    )
