"""Interpretability reports: which tokens matched, how strongly, and which
of them are expansions absent from the surface text.

The product of a token's query weight and candidate weight is its alignment
strength; the sum of all such contributions is exactly the lexical score.
"""

from __future__ import annotations

import html as html_escape
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .scoring import dot_dense

RENDER_FORMATS = ("text", "json", "html")
INTENSITY_LEVELS = 5


@dataclass
class MatchRecord:
    token_id: int
    token: str
    q_weight: float
    c_weight: float
    contribution: float
    expansion_in_query: bool
    expansion_in_candidate: bool


@dataclass
class MatchReport:
    query_id: str
    candidate_id: str
    records: list[MatchRecord]
    lexical_score: float
    dense_score: float
    combined: float
    alpha: float


def _is_expansion(token: str, surface_tokens: list[str]) -> bool:
    lowered = token.lower()
    return all(lowered != t.lower() for t in surface_tokens)


def match_report(q, c, vocab: dict[int, str], alpha: float = 0.5) -> MatchReport:
    """One record per token id shared by the two sparse representations.

    Records are sorted by descending contribution (ties by token id).  The
    expansion flags mark tokens that do not appear in the respective
    surface token lists.
    """
    if q.surface_tokens is None or c.surface_tokens is None:
        raise ValidationError("match_report requires surface tokens on both entries")
    shared, qi, ci = np.intersect1d(
        q.sparse.token_ids, c.sparse.token_ids, assume_unique=True, return_indices=True
    )
    records = []
    lexical = 0.0
    for t, iq, ic in zip(shared, qi, ci):
        token_id = int(t)
        if token_id not in vocab:
            raise ValidationError(f"vocabulary map has no entry for token id {token_id}")
        qw = float(q.sparse.weights[iq])
        cw = float(c.sparse.weights[ic])
        contribution = float(np.float64(qw) * np.float64(cw))
        lexical += contribution
        token = vocab[token_id]
        records.append(
            MatchRecord(
                token_id=token_id,
                token=token,
                q_weight=qw,
                c_weight=cw,
                contribution=contribution,
                expansion_in_query=_is_expansion(token, q.surface_tokens),
                expansion_in_candidate=_is_expansion(token, c.surface_tokens),
            )
        )
    records.sort(key=lambda rec: (-rec.contribution, rec.token_id))
    dense = dot_dense(q.dense, c.dense)
    return MatchReport(
        query_id=q.id,
        candidate_id=c.id,
        records=records,
        lexical_score=lexical,
        dense_score=dense,
        combined=alpha * dense + (1.0 - alpha) * lexical,
        alpha=alpha,
    )


def _bucket(contribution: float, max_contribution: float) -> int:
    """Intensity level 1..5 proportional to contribution / max."""
    if max_contribution <= 0:
        return 0
    level = int(np.ceil(INTENSITY_LEVELS * contribution / max_contribution))
    return min(max(level, 1), INTENSITY_LEVELS)


def render(report: MatchReport, format: str = "text") -> str:
    """Render a report as plain text, lossless JSON, or standalone HTML."""
    if format not in RENDER_FORMATS:
        raise ValidationError(f"format must be one of {RENDER_FORMATS}, got {format!r}")
    if format == "json":
        return json.dumps(asdict(report), indent=2)
    if format == "text":
        return _render_text(report)
    return _render_html(report)


def _render_text(report: MatchReport) -> str:
    lines = [
        f"query {report.query_id} vs candidate {report.candidate_id}",
        f"dense={report.dense_score:.6f}  lexical={report.lexical_score:.6f}  "
        f"combined={report.combined:.6f}  (alpha={report.alpha})",
    ]
    if not report.records:
        lines.append("no lexical overlap")
        return "\n".join(lines) + "\n"
    top = report.records[0].contribution
    lines.append(f"{'token':<20} {'q_weight':>9} {'c_weight':>9} {'strength':>9}  match")
    for rec in report.records:
        marks = "#" * _bucket(rec.contribution, top)
        kind = []
        if rec.expansion_in_query:
            kind.append("expands query")
        if rec.expansion_in_candidate:
            kind.append("expands candidate")
        label = "; ".join(kind) if kind else "surface"
        lines.append(
            f"{rec.token:<20} {rec.q_weight:>9.4f} {rec.c_weight:>9.4f} "
            f"{rec.contribution:>9.4f}  {marks:<5} {label}"
        )
    return "\n".join(lines) + "\n"


def _render_html(report: MatchReport) -> str:
    rows = []
    top = report.records[0].contribution if report.records else 0.0
    for rec in report.records:
        opacity = _bucket(rec.contribution, top) / INTENSITY_LEVELS
        flags = []
        if rec.expansion_in_query:
            flags.append("expands query")
        if rec.expansion_in_candidate:
            flags.append("expands candidate")
        rows.append(
            "<tr>"
            f'<td><span style="background: rgba(220, 60, 40, {opacity:.1f}); '
            f'padding: 1px 4px;">{html_escape.escape(rec.token)}</span></td>'
            f"<td>{rec.q_weight:.4f}</td><td>{rec.c_weight:.4f}</td>"
            f"<td>{rec.contribution:.4f}</td>"
            f"<td>{html_escape.escape('; '.join(flags) if flags else 'surface')}</td>"
            "</tr>"
        )
    body = (
        "<table><tr><th>token</th><th>query weight</th><th>candidate weight</th>"
        "<th>strength</th><th>match</th></tr>" + "".join(rows) + "</table>"
        if rows
        else "<p>no lexical overlap</p>"
    )
    return (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'>"
        f"<title>match report {html_escape.escape(report.query_id)} vs "
        f"{html_escape.escape(report.candidate_id)}</title>"
        "<style>body { font-family: sans-serif; } td, th { padding: 2px 8px; }</style>"
        "</head><body>"
        f"<h1>{html_escape.escape(report.query_id)} vs {html_escape.escape(report.candidate_id)}</h1>"
        f"<p>dense={report.dense_score:.6f} lexical={report.lexical_score:.6f} "
        f"combined={report.combined:.6f} (alpha={report.alpha})</p>"
        f"{body}"
        "</body></html>\n"
    )
