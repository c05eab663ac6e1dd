"""Command-line entry point wiring the engine into file-based pipelines.

Every subcommand is deterministic given its inputs (randomness is always
seeded), writes its outputs atomically, and drops a run manifest next to
each output recording the resolved configuration and input digests.

Exit codes: 0 success, 2 validation or configuration error, 3 I/O or file
format error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import bm25 as bm25_mod
from . import evaluation, explain, index, resources, scoring
from .errors import FormatError, ValidationError
from .representations import EncodeConfig, encode, read_dense_file, read_logit_file, read_manifest

THREADS_ENV = "HYBRIDRANK_THREADS"


def _worker_count() -> int:
    limit = os.environ.get(THREADS_ENV)
    cpus = os.cpu_count() or 1
    if limit:
        try:
            return max(1, min(cpus, int(limit)))
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {limit!r}") from None
    return min(4, cpus)


# ---------------------------------------------------------------------------
# Run manifests and atomic output
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    subcommand: str
    config: dict
    input_digests: dict[str, str]
    seed: int | None
    tool_version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


def _digest(path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def _atomic_write(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-hybridrank-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(output_path, subcommand: str, config: dict, inputs: dict, seed=None) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config=config,
        input_digests={name: _digest(p) for name, p in inputs.items() if p},
        seed=seed,
    )
    _atomic_write(str(output_path) + ".manifest.json", json.dumps(asdict(manifest), indent=2) + "\n")


def _read_vocab(path) -> dict[int, str]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return {int(k): v for k, v in raw.items()}


def _read_jsonl_objects(path) -> list[dict]:
    objs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                objs.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_no}: invalid JSON ({exc})") from None
    return objs


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_encode(args) -> int:
    matrices = read_logit_file(args.logits)
    manifest = read_manifest(args.manifest)
    dense = read_dense_file(args.dense)
    if not (len(matrices) == len(manifest) == len(dense)):
        raise ValidationError(
            f"item count mismatch: {len(matrices)} logit matrices, "
            f"{len(manifest)} manifest entries, {len(dense)} dense vectors"
        )
    cfg = EncodeConfig(k=args.k, aggregation=args.aggregation)
    lines = []
    for matrix, meta, vec in zip(matrices, manifest, dense):
        rep = encode(matrix, cfg)
        obj = {
            "id": meta["id"],
            "source": meta["source"],
            "dense": [float(v) for v in vec],
            "sparse": rep.to_dict(),
            "tokens": meta["surface_tokens"],
        }
        lines.append(json.dumps(obj))
    _atomic_write(args.output, "".join(line + "\n" for line in lines))
    _write_manifest(
        args.output,
        "encode",
        {"k": args.k, "aggregation": args.aggregation},
        {"logits": args.logits, "manifest": args.manifest, "dense": args.dense},
    )
    print(f"encoded {len(lines)} items -> {args.output}")
    return 0


def cmd_index(args) -> int:
    entries = index.read_entries_jsonl(args.reps)
    idx = index.build(
        entries,
        vocab_size=args.vocab_size,
        k=args.k,
        config={"source": os.path.basename(args.reps)},
    )
    index.save(idx, args.output)
    _write_manifest(
        args.output,
        "index",
        {"vocab_size": args.vocab_size, "k": args.k},
        {"reps": args.reps},
    )
    print(f"indexed {len(idx)} entries (h={idx.h}, vocab={idx.vocab_size}) -> {args.output}")
    return 0


def _load_priors(path) -> dict[str, float]:
    with open(path, encoding="utf-8") as fh:
        priors = json.load(fh)
    return {str(k): float(v) for k, v in priors.items()}


def _rank_queries(idx, queries, cfg, top_n, rescale: bool):
    def one(query_entry):
        if rescale:
            scored = idx.query(query_entry, cfg, top_n=None)
            scored = scoring.source_aware_rescale(scored, cfg)
            if top_n is not None:
                scored = scored[:top_n]
        else:
            scored = idx.query(query_entry, cfg, top_n=top_n)
        return query_entry.id, scored

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        return list(pool.map(one, queries))


def cmd_rank(args) -> int:
    idx = index.load(args.index)
    queries = index.read_entries_jsonl(args.queries)
    priors = _load_priors(args.source_priors) if args.source_priors else None
    cfg = scoring.ScoringConfig(
        alpha=args.alpha,
        source_priors=priors,
        normalization="min_max_per_query" if priors else "none",
    )
    ranked = _rank_queries(idx, queries, cfg, args.top_n, rescale=priors is not None)
    lines = []
    for qid, scored in ranked:
        lines.extend(scoring.format_trec_run(qid, scored, tag=args.trec_tag))
    _atomic_write(args.output, "".join(line + "\n" for line in lines))
    _write_manifest(
        args.output,
        "rank",
        {"alpha": args.alpha, "top_n": args.top_n, "trec_tag": args.trec_tag,
         "source_priors": priors},
        {"index": args.index, "queries": args.queries, "priors_file": args.source_priors},
    )
    print(f"ranked {len(queries)} queries -> {args.output}")
    return 0


def _parse_grid(raw: str) -> list[float]:
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must be start:stop:step, got {raw!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValidationError("grid step must be positive")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 10))
            v += step
    else:
        values = [round(float(p), 10) for p in raw.split(",") if p.strip()]
    values = list(dict.fromkeys(values))  # dedupe, keep order
    if not values:
        raise ValidationError("alpha grid is empty")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"grid value {v} outside [0, 1]")
    return values


def _truncated_index(idx, k: int):
    entries = [
        index.HybridEntry(
            id=e.id,
            source=e.source,
            dense=e.dense,
            sparse=e.sparse.truncate(k),
            surface_tokens=e.surface_tokens,
        )
        for e in idx.entries
    ]
    return index.build(entries, vocab_size=idx.vocab_size, k=k, config=idx.config)


def cmd_sweep(args) -> int:
    idx = index.load(args.index)
    queries = index.read_entries_jsonl(args.queries)
    qrels = evaluation.parse_qrels(args.qrels)
    priors = _load_priors(args.priors) if args.priors else None
    alphas = _parse_grid(args.grid)
    k_values = list(dict.fromkeys(int(k) for k in args.k_list.split(",") if k.strip()))
    if not k_values:
        raise ValidationError("k list is empty")

    rows = []
    for k in k_values:
        k_idx = _truncated_index(idx, k)
        k_queries = [
            index.HybridEntry(q.id, q.source, q.dense, q.sparse.truncate(k), q.surface_tokens)
            for q in queries
        ]
        for alpha in alphas:
            for mode in ("raw", "scaled") if priors else ("raw",):
                cfg = scoring.ScoringConfig(
                    alpha=alpha,
                    source_priors=priors if mode == "scaled" else None,
                    normalization="min_max_per_query" if mode == "scaled" else "none",
                )
                ranked = _rank_queries(k_idx, k_queries, cfg, args.top_n, rescale=mode == "scaled")
                run = {qid: [(c.candidate_id, c.combined) for c in scored] for qid, scored in ranked}
                report = evaluation.evaluate(run, qrels)
                rows.append({"alpha": alpha, "k": k, "mode": mode, **report.aggregates})

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["alpha", "k", "mode", *evaluation.METRIC_NAMES])
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(args.output, buf.getvalue())
    _write_manifest(
        args.output,
        "sweep",
        {"grid": args.grid, "k_list": args.k_list, "top_n": args.top_n, "priors": priors},
        {"index": args.index, "queries": args.queries, "qrels": args.qrels,
         "priors_file": args.priors},
    )
    print(f"swept {len(rows)} grid points -> {args.output}")
    return 0


def _sources_from_index(path) -> dict[str, str]:
    idx = index.load(path)
    return {e.id: e.source for e in idx.entries}


def cmd_eval(args) -> int:
    run = evaluation.parse_run(args.run)
    qrels = evaluation.parse_qrels(args.qrels)
    report = evaluation.evaluate(run, qrels)
    if args.per_source:
        if not args.index:
            raise ValidationError("--per-source needs --index to resolve candidate sources")
        report.per_source = evaluation.per_source_breakdown(run, qrels, _sources_from_index(args.index))
    if args.baseline_run:
        baseline = evaluation.evaluate(evaluation.parse_run(args.baseline_run), qrels)
        report.significance = evaluation.significance_block(
            report, baseline, iterations=args.iterations, seed=args.seed
        )
    _atomic_write(args.output, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["query_id", *evaluation.METRIC_NAMES])
        for qid in sorted(report.per_query):
            writer.writerow([qid, *(report.per_query[qid][m] for m in evaluation.METRIC_NAMES)])
        writer.writerow(["ALL", *(report.aggregates[m] for m in evaluation.METRIC_NAMES)])
        _atomic_write(args.csv, buf.getvalue())
    _write_manifest(
        args.output,
        "eval",
        {"per_source": args.per_source, "iterations": args.iterations},
        {"run": args.run, "qrels": args.qrels, "baseline": args.baseline_run,
         "index": args.index},
        seed=args.seed,
    )
    summary = "  ".join(f"{m}={report.aggregates[m]:.4f}" for m in evaluation.METRIC_NAMES)
    print(f"{report.evaluated_queries} queries  {summary}")
    return 0


def cmd_priors(args) -> int:
    run = evaluation.parse_run(args.run)
    qrels = evaluation.parse_qrels(args.qrels)
    priors = evaluation.source_priors_from_run(run, qrels, _sources_from_index(args.index))
    if not priors:
        raise ValidationError("no source achieved a positive hit rate; cannot derive priors")
    _atomic_write(args.output, json.dumps(priors, indent=2, sort_keys=True) + "\n")
    _write_manifest(
        args.output, "priors", {},
        {"run": args.run, "qrels": args.qrels, "index": args.index},
    )
    print(f"priors for {len(priors)} sources -> {args.output}")
    return 0


def cmd_explain(args) -> int:
    idx = index.load(args.index)
    queries = {e.id: e for e in index.read_entries_jsonl(args.queries)}
    if args.query_id not in queries:
        raise ValidationError(f"query id {args.query_id!r} not found in {args.queries}")
    query_entry = queries[args.query_id]
    candidate = idx.get(args.candidate_id)
    vocab = _read_vocab(args.vocab)
    report = explain.match_report(query_entry, candidate, vocab, alpha=args.alpha)
    document = explain.render(report, format=args.format)
    if args.output:
        _atomic_write(args.output, document)
        _write_manifest(
            args.output,
            "explain",
            {"query_id": args.query_id, "candidate_id": args.candidate_id,
             "alpha": args.alpha, "format": args.format},
            {"index": args.index, "queries": args.queries, "vocab": args.vocab},
        )
    else:
        sys.stdout.write(document)
    return 0


def cmd_resources(args) -> int:
    table = resources.cost_table(h=args.h, n=args.n, k=args.k)
    payload: dict = {"cost_model": table}
    if args.measure:
        if not (args.index and args.queries):
            raise ValidationError("--measure needs --index and --queries")
        idx = index.load(args.index)
        queries = index.read_entries_jsonl(args.queries)
        cfg = scoring.ScoringConfig(alpha=args.alpha)
        report = resources.measure_latency(idx, queries, cfg, top_n=args.top_n)
        payload["latency"] = asdict(report)
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(table[0].keys()))
        writer.writeheader()
        writer.writerows(table)
        text = buf.getvalue()
    if args.output:
        _atomic_write(args.output, text)
        _write_manifest(
            args.output,
            "resources",
            {"h": args.h, "n": args.n, "k": args.k, "measure": args.measure},
            {"index": args.index, "queries": args.queries},
        )
    else:
        sys.stdout.write(text)
    return 0


def cmd_bm25(args) -> int:
    corpus_objs = _read_jsonl_objects(args.corpus)
    if not corpus_objs:
        raise ValidationError(f"{args.corpus}: corpus is empty")
    query_objs = _read_jsonl_objects(args.queries)
    rules = bm25_mod.NormalizationRules(
        lowercase=not args.no_lowercase,
        json_flatten=not args.no_json_flatten,
        non_english_transliteration=not args.no_transliterate,
        unit_expansion=() if args.no_unit_expansion else tuple(bm25_mod.DEFAULT_UNIT_RULES),
    )
    corpus = {str(o["id"]): o["text"] for o in corpus_objs}
    if len(corpus) != len(corpus_objs):
        raise ValidationError("duplicate document ids in corpus")
    stats = bm25_mod.CorpusStats.build(
        {doc_id: bm25_mod.tokenize(bm25_mod.normalize(text, rules)) for doc_id, text in corpus.items()}
    )
    lines = []
    for obj in query_objs:
        qid = str(obj["id"])
        terms = bm25_mod.tokenize(bm25_mod.normalize(obj["text"], rules))
        scored = [(doc_id, bm25_mod.bm25_score(terms, doc_id, stats, args.k1, args.b)) for doc_id in corpus]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        if args.top_n is not None:
            scored = scored[: args.top_n]
        for rank_pos, (doc_id, score) in enumerate(scored, start=1):
            lines.append(f"{qid} Q0 {doc_id} {rank_pos} {score:.6f} {args.trec_tag}")
    _atomic_write(args.output, "".join(line + "\n" for line in lines))
    _write_manifest(
        args.output,
        "bm25",
        {"k1": args.k1, "b": args.b, "top_n": args.top_n, "trec_tag": args.trec_tag,
         "lowercase": rules.lowercase, "json_flatten": rules.json_flatten,
         "transliterate": rules.non_english_transliteration,
         "unit_expansion": bool(rules.unit_expansion)},
        {"corpus": args.corpus, "queries": args.queries},
    )
    print(f"ranked {len(query_objs)} queries over {len(corpus)} documents -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridrank",
        description="Hybrid sparse-dense ranking engine",
    )
    parser.add_argument("--version", action="version", version=f"hybridrank {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("encode", help="turn logit matrices into sparse representations")
    p.add_argument("--logits", required=True, help="HLGT logit file")
    p.add_argument("--manifest", required=True, help="sidecar JSON manifest")
    p.add_argument("--dense", required=True, help="parallel dense vector file")
    p.add_argument("--k", type=int, default=128, help="top-k token budget")
    p.add_argument("--aggregation", choices=["max", "sum"], default="max")
    p.add_argument("--output", required=True, help="representation JSONL output")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("index", help="build a persistent index from representations")
    p.add_argument("--reps", required=True, help="representation JSONL")
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--output", required=True, help="index file output")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("rank", help="rank queries against an index, emit a TREC run")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="query representation JSONL")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--source-priors", default=None, help="JSON file of source -> prior")
    p.add_argument("--trec-tag", default="hybridrank")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("sweep", help="metric sweep over alpha values and k budgets")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--grid", default="0:1:0.1", help="alpha grid start:stop:step or comma list")
    p.add_argument("--k-list", default="128,256,512", help="comma-separated k budgets")
    p.add_argument("--priors", default=None, help="optional priors JSON for scaled rows")
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--output", required=True, help="CSV output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="score a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--baseline-run", default=None, help="adds a significance block")
    p.add_argument("--per-source", action="store_true")
    p.add_argument("--index", default=None, help="index file for candidate sources")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="report JSON output")
    p.add_argument("--csv", default=None, help="optional per-query CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("priors", help="derive per-source priors from a run and qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("explain", help="token-level match report for one pair")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--query-id", required=True)
    p.add_argument("--candidate-id", required=True)
    p.add_argument("--vocab", required=True, help="JSON map of token id -> token string")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--format", choices=list(explain.RENDER_FORMATS), default="text")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("resources", help="cost model table and optional latency measurement")
    p.add_argument("--h", type=int, default=768)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--measure", action="store_true")
    p.add_argument("--index", default=None)
    p.add_argument("--queries", default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("bm25", help="lexical baseline run over a text corpus")
    p.add_argument("--corpus", required=True, help='JSONL of {"id","source","text"}')
    p.add_argument("--queries", required=True, help='JSONL of {"id","text"}')
    p.add_argument("--k1", type=float, default=1.5)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--trec-tag", default="bm25")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--no-json-flatten", action="store_true")
    p.add_argument("--no-transliterate", action="store_true")
    p.add_argument("--no-unit-expansion", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bm25)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
