"""Ranking-quality metrics and significance tests over runs and qrels.

Six metrics are macro-averaged per query: mean average precision over the
full ranking, R-precision, reciprocal rank within the top 5, binary-gain
NDCG without cutoff, hit rate within the top 5, and precision of the top
candidate.  Queries without any relevant candidate are excluded from the
averages.  Two paired significance tests are provided: a sign-flip
randomization test and Student's t-test on per-query differences.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ValidationError

METRIC_NAMES = ("map", "r_prec", "mrr_at_5", "ndcg", "hit_rate_at_5", "p_at_1")

# Qrels: query_id -> set of relevant candidate ids (binary relevance).
# RankedRun: query_id -> [(candidate_id, score), ...] in ranked order.
Qrels = dict[str, set[str]]
RankedRun = dict[str, list[tuple[str, float]]]


def parse_qrels(path) -> Qrels:
    """TREC qrels lines: qid 0 docid rel, rel in {0, 1}."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValidationError(f"{path}:{line_no}: expected 4 fields, got {len(parts)}")
            qid, _, docid, rel = parts
            qrels.setdefault(qid, set())
            if int(rel) > 0:
                qrels[qid].add(docid)
    return qrels


def parse_run(path) -> RankedRun:
    """TREC run lines: qid Q0 docid rank score tag; order within a query is kept."""
    run: RankedRun = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValidationError(f"{path}:{line_no}: expected 6 fields, got {len(parts)}")
            qid, _, docid, _, score, _ = parts
            ranking = run.setdefault(qid, [])
            if any(d == docid for d, _ in ranking):
                raise ValidationError(f"{path}:{line_no}: duplicate candidate {docid!r} for query {qid!r}")
            ranking.append((docid, float(score)))
    return run


def write_run(path, run: RankedRun, tag: str = "hybridrank") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in run:
            for rank_pos, (docid, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {docid} {rank_pos} {score:.6f} {tag}\n")


def query_metrics(ranking: list[str], relevant: set[str]) -> dict[str, float]:
    """All six metrics for one query's ranked candidate ids."""
    if not relevant:
        raise ValidationError("query_metrics requires at least one relevant candidate")
    r = len(relevant)

    hits = 0
    precision_sum = 0.0
    dcg = 0.0
    first_relevant_rank = None
    for i, docid in enumerate(ranking):
        if docid in relevant:
            hits += 1
            precision_sum += hits / (i + 1)
            dcg += 1.0 / math.log2(i + 2)
            if first_relevant_rank is None:
                first_relevant_rank = i + 1
    idcg = sum(1.0 / math.log2(j + 2) for j in range(r))

    hits_at_r = sum(1 for docid in ranking[:r] if docid in relevant)
    return {
        "map": precision_sum / r,
        "r_prec": hits_at_r / r,
        "mrr_at_5": (
            1.0 / first_relevant_rank
            if first_relevant_rank is not None and first_relevant_rank <= 5
            else 0.0
        ),
        "ndcg": dcg / idcg,
        "hit_rate_at_5": 1.0 if any(d in relevant for d in ranking[:5]) else 0.0,
        "p_at_1": 1.0 if ranking and ranking[0] in relevant else 0.0,
    }


@dataclass
class MetricReport:
    per_query: dict[str, dict[str, float]]
    aggregates: dict[str, float]
    evaluated_queries: int
    skipped_no_relevant: list[str] = field(default_factory=list)
    skipped_not_in_qrels: list[str] = field(default_factory=list)
    per_source: dict[str, dict] | None = None
    significance: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "aggregates": self.aggregates,
            "evaluated_queries": self.evaluated_queries,
            "skipped_no_relevant": self.skipped_no_relevant,
            "skipped_not_in_qrels": self.skipped_not_in_qrels,
            "per_query": self.per_query,
        }
        if self.per_source is not None:
            out["per_source"] = self.per_source
        if self.significance is not None:
            out["significance"] = self.significance
        return out

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", *METRIC_NAMES])
            for qid in sorted(self.per_query):
                writer.writerow([qid, *(self.per_query[qid][m] for m in METRIC_NAMES)])
            writer.writerow(["ALL", *(self.aggregates[m] for m in METRIC_NAMES)])


def evaluate(run: RankedRun, qrels: Qrels) -> MetricReport:
    """Per-query metrics plus macro averages over the evaluable query set.

    A query is evaluable when it appears in both structures and has at
    least one relevant candidate; others are reported and excluded.
    """
    per_query: dict[str, dict[str, float]] = {}
    skipped_no_relevant = []
    skipped_not_in_qrels = []
    for qid, ranking in run.items():
        if qid not in qrels:
            skipped_not_in_qrels.append(qid)
            continue
        if not qrels[qid]:
            skipped_no_relevant.append(qid)
            continue
        per_query[qid] = query_metrics([docid for docid, _ in ranking], qrels[qid])
    if not per_query:
        raise ValidationError("no evaluable queries (none present in both run and qrels with a relevant candidate)")
    aggregates = {
        m: sum(per_query[qid][m] for qid in per_query) / len(per_query)
        for m in METRIC_NAMES
    }
    return MetricReport(
        per_query=per_query,
        aggregates=aggregates,
        evaluated_queries=len(per_query),
        skipped_no_relevant=sorted(skipped_no_relevant),
        skipped_not_in_qrels=sorted(skipped_not_in_qrels),
    )


def per_source_breakdown(run: RankedRun, qrels: Qrels, sources: dict[str, str]) -> dict[str, dict]:
    """Evaluate each source in isolation.

    For a source tag, the run is filtered to candidates of that source and
    the relevant sets likewise; queries that end up with no relevant
    candidate of the source drop out of that source's averages.
    """
    tags = sorted(set(sources.values()))
    breakdown: dict[str, dict] = {}
    for tag in tags:
        sub_run: RankedRun = {}
        sub_qrels: Qrels = {}
        for qid, ranking in run.items():
            filtered = [(d, s) for d, s in ranking if sources.get(d) == tag]
            if filtered:
                sub_run[qid] = filtered
            if qid in qrels:
                sub_qrels[qid] = {d for d in qrels[qid] if sources.get(d) == tag}
        try:
            report = evaluate(sub_run, sub_qrels)
        except ValidationError:
            continue
        breakdown[tag] = {
            "aggregates": report.aggregates,
            "evaluated_queries": report.evaluated_queries,
        }
    return breakdown


def source_priors_from_run(run: RankedRun, qrels: Qrels, sources: dict[str, str]) -> dict[str, float]:
    """Per-source hit rate within the top 5, usable as prior confidence."""
    breakdown = per_source_breakdown(run, qrels, sources)
    priors = {}
    for tag, block in breakdown.items():
        rate = block["aggregates"]["hit_rate_at_5"]
        if rate > 0:
            priors[tag] = rate
    return priors


def fisher_randomization(
    per_query_a,
    per_query_b,
    iterations: int = 10000,
    seed: int = 0,
) -> float:
    """Two-sided sign-flip randomization test on paired per-query values.

    p = (count of sign-flip assignments with |mean| >= |observed mean| + 1)
        / (iterations + 1), deterministic for a fixed seed.
    """
    a = np.asarray(per_query_a, dtype=np.float64)
    b = np.asarray(per_query_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise ValidationError("need at least two paired values")
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    diffs = a - b
    observed = abs(float(diffs.mean()))
    rng = np.random.default_rng(seed)
    exceed = 0
    remaining = iterations
    while remaining > 0:
        chunk = min(remaining, 4096)
        signs = rng.integers(0, 2, size=(chunk, len(diffs))) * 2 - 1
        means = np.abs((signs * diffs).mean(axis=1))
        exceed += int(np.count_nonzero(means >= observed))
        remaining -= chunk
    return (exceed + 1) / (iterations + 1)


def paired_t_test(per_query_a, per_query_b) -> tuple[float, float]:
    """Paired Student's t on per-query differences; two-sided p, n-1 dof.

    Zero-variance differences are degenerate: p = 1.0 when the mean
    difference is zero, else p = 0.0.
    """
    a = np.asarray(per_query_a, dtype=np.float64)
    b = np.asarray(per_query_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise ValidationError("need at least two paired values")
    diffs = a - b
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        return (0.0, 1.0) if mean == 0.0 else (math.inf if mean > 0 else -math.inf, 0.0)
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return t, p


def significance_block(
    report_a: MetricReport,
    report_b: MetricReport,
    iterations: int = 10000,
    seed: int = 0,
) -> dict:
    """Fisher randomization and paired t-test per metric, over shared queries."""
    shared = sorted(set(report_a.per_query) & set(report_b.per_query))
    if len(shared) < 2:
        raise ValidationError("significance tests need at least two shared queries")
    block: dict = {"queries": len(shared), "iterations": iterations, "seed": seed, "metrics": {}}
    for m in METRIC_NAMES:
        a = [report_a.per_query[q][m] for q in shared]
        b = [report_b.per_query[q][m] for q in shared]
        t, t_p = paired_t_test(a, b)
        block["metrics"][m] = {
            "fisher_p": fisher_randomization(a, b, iterations=iterations, seed=seed),
            "t_statistic": t,
            "t_p": t_p,
        }
    return block
