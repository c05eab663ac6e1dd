"""Whole-pipeline smoke: real text in, ranked TREC output and metrics out.

Twenty short product documents and five queries go through the bridge, then
through the engine's encode/index/rank/eval subcommands — the engine is
only ever touched via its CLI.  One query/document pair shares no surface
token at all, so any lexical score it earns comes purely from vocabulary
expansion.
"""

import json
import subprocess
import sys

import pytest

from encoder_bridge import ExportConfig, TextItem, export, formats, run_engine

DOCS = [
    # lighting
    ("d00", "description", "the bright lamp lights the office desk"),
    ("d01", "review", "this new lamp is very bright and quiet"),
    ("d02", "bullet", "a small desk lamp with a metal stand"),
    ("d03", "review", "the screen light feels too bright"),
    ("d04", "cqa", "good lamp for the office"),
    # charging
    ("d05", "description", "the charger charges the phone fast"),
    ("d06", "bullet", "this power cable fits the laptop and the phone"),
    ("d07", "review", "the battery lasts for a long time"),
    ("d08", "description", "wireless charger pad for the desk"),
    ("d09", "attribute", "battery charger"),
    # ceramic decor
    ("d10", "description", "white ceramic vase for the kitchen table"),
    ("d11", "bullet", "a blue ceramic vase with a glass frame"),
    ("d12", "review", "the glass frame looks nice on the shelf"),
    ("d13", "description", "this large vase holds its color well"),
    ("d14", "osp", "old ceramic mug with a nice color"),
    # textiles
    ("d15", "description", "warm cotton blanket feels very soft"),
    ("d16", "review", "this soft blanket is large and warm"),
    ("d17", "bullet", "soft cotton towel and a pillow"),
    ("d18", "review", "the rug feels warm and soft"),
    ("d19", "osp", "cheap cotton jacket in black"),
]

QUERIES = [
    ("q0", "which lamp is bright"),
    ("q1", "can the charger charge the phone"),
    ("q2", "white ceramic vase for the kitchen"),
    ("q3", "warm soft cotton blanket"),
    ("q4", "power bank"),  # no surface word in common with its relevant d09
]

QRELS = {
    "q0": ["d00", "d01"],
    "q1": ["d05", "d08"],
    "q2": ["d10", "d11"],
    "q3": ["d15", "d16"],
    "q4": ["d09"],
}

ALPHAS = ("0", "0.5", "1")
TOP_K = 24


@pytest.fixture(scope="module")
def pipeline(model_dir, tmp_path_factory):
    """Run the full corpus through bridge and engine once."""
    work = tmp_path_factory.mktemp("e2e")

    doc_texts = work / "docs.texts.jsonl"
    doc_texts.write_text(
        "".join(
            json.dumps({"id": i, "source": s, "text": t}) + "\n" for i, s, t in DOCS
        )
    )
    # Documents go through the bridge's own CLI; queries through the library.
    proc = subprocess.run(
        [
            sys.executable, "-m", "encoder_bridge", "export",
            "--input", str(doc_texts),
            "--model", model_dir,
            "--output-prefix", str(work / "docs"),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    export(
        [TextItem(qid, "other", text) for qid, text in QUERIES],
        ExportConfig(model_id=model_dir),
        str(work / "queries"),
    )

    for prefix in ("docs", "queries"):
        run_engine(
            [
                "encode",
                "--logits", str(work / f"{prefix}.hlgt"),
                "--manifest", str(work / f"{prefix}.manifest.json"),
                "--dense", str(work / f"{prefix}.dense"),
                "--k", str(TOP_K),
                "--output", str(work / f"{prefix}.reps.jsonl"),
            ]
        )
    run_engine(
        ["index", "--reps", str(work / "docs.reps.jsonl"), "--output", str(work / "docs.hidx")]
    )

    qrels_path = work / "qrels.txt"
    qrels_path.write_text(
        "".join(f"{qid} 0 {did} 1\n" for qid, dids in QRELS.items() for did in dids)
    )

    runs, reports = {}, {}
    for alpha in ALPHAS:
        run_path = work / f"run.alpha{alpha}.trec"
        run_engine(
            [
                "rank",
                "--index", str(work / "docs.hidx"),
                "--queries", str(work / "queries.reps.jsonl"),
                "--alpha", alpha,
                "--output", str(run_path),
            ]
        )
        report_path = work / f"report.alpha{alpha}.json"
        run_engine(
            [
                "eval",
                "--run", str(run_path),
                "--qrels", str(qrels_path),
                "--output", str(report_path),
            ]
        )
        runs[alpha] = run_path.read_text().splitlines()
        reports[alpha] = json.loads(report_path.read_text())
    return work, runs, reports


class TestTrecRunValidity:
    def test_every_line_is_well_formed(self, pipeline):
        _, runs, _ = pipeline
        doc_ids = {i for i, _, _ in DOCS}
        for alpha, lines in runs.items():
            assert lines, f"alpha={alpha} produced an empty run"
            for line in lines:
                qid, q0, did, rank, score, tag = line.split()
                assert qid in QRELS
                assert q0 == "Q0"
                assert did in doc_ids
                assert rank.isdigit()
                float(score)
                assert tag == "hybridrank"

    def test_ranks_count_up_and_scores_never_increase(self, pipeline):
        _, runs, _ = pipeline
        for lines in runs.values():
            by_query: dict[str, list[tuple[int, float]]] = {}
            for line in lines:
                qid, _, _, rank, score, _ = line.split()
                by_query.setdefault(qid, []).append((int(rank), float(score)))
            assert set(by_query) == set(QRELS)
            for rows in by_query.values():
                assert [r for r, _ in rows] == list(range(1, len(rows) + 1))
                scores = [s for _, s in rows]
                assert all(a >= b for a, b in zip(scores, scores[1:]))
                assert len(rows) == len(DOCS)


class TestMetricReports:
    def test_reports_carry_all_six_metrics_for_all_queries(self, pipeline):
        _, _, reports = pipeline
        metric_names = {"map", "r_prec", "mrr_at_5", "ndcg", "hit_rate_at_5", "p_at_1"}
        for alpha, report in reports.items():
            assert report["evaluated_queries"] == len(QUERIES)
            assert set(report["aggregates"]) == metric_names
            for value in report["aggregates"].values():
                assert 0.0 <= value <= 1.0
            assert set(report["per_query"]) == set(QRELS)
            assert report["skipped_no_relevant"] == []
            assert report["skipped_not_in_qrels"] == []

    def test_endpoint_runs_are_genuinely_different_rankings(self, pipeline):
        _, runs, _ = pipeline
        assert runs["0"] != runs["1"]


class TestExpansionOnlyMatch:
    def test_query_and_document_share_no_surface_token(self, pipeline):
        work, _, _ = pipeline
        docs_manifest = formats.read_sidecar_manifest(work / "docs.manifest.json")
        queries_manifest = formats.read_sidecar_manifest(work / "queries.manifest.json")
        doc_surface = {e["id"]: set(e["surface_tokens"]) for e in docs_manifest}
        query_surface = {e["id"]: set(e["surface_tokens"]) for e in queries_manifest}
        assert query_surface["q4"] == {"power", "bank"}
        assert doc_surface["d09"] == {"battery", "charger"}
        assert not (query_surface["q4"] & doc_surface["d09"])

    def test_expanded_vocabularies_do_overlap(self, pipeline):
        work, _, _ = pipeline
        doc_reps = {r["id"]: r for r in formats.read_engine_reps(work / "docs.reps.jsonl")}
        query_reps = {r["id"]: r for r in formats.read_engine_reps(work / "queries.reps.jsonl")}
        shared = set(query_reps["q4"]["sparse"]) & set(doc_reps["d09"]["sparse"])
        assert shared, "expansion produced no common vocabulary terms"

    def test_lexical_only_score_is_positive(self, pipeline):
        _, runs, _ = pipeline
        for line in runs["0"]:
            qid, _, did, _, score, _ = line.split()
            if qid == "q4" and did == "d09":
                assert float(score) > 0.0
                return
        pytest.fail("q4/d09 absent from the lexical-only run")
