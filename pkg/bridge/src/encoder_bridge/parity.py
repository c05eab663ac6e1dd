"""Cross-package verification of the sparsification pipeline.

The engine turns a logit matrix into a sparse representation by saturating
(``log1p(relu(m))``), aggregating rows (max or sum), and keeping the top-k
positive weights with ties resolved toward smaller token ids.  This module
recomputes that pipeline from scratch on the bridge side and compares the
result against what the engine actually produced for the same exported
files, weight by weight.  Any disagreement beyond tolerance is reported
with its token id.

The engine is only ever reached through its command line; nothing here
imports it.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import formats
from .errors import BridgeError, EngineInvocationError

ENGINE_ENV = "ENCODER_BRIDGE_ENGINE"

DEFAULT_TOLERANCE = 1e-5


# ---------------------------------------------------------------------------
# Reference pipeline (bridge-side reimplementation)
# ---------------------------------------------------------------------------


def reference_saturate(matrix: np.ndarray) -> np.ndarray:
    """log(1 + relu(m)) elementwise."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise BridgeError(f"logit matrix must be 2-D, got shape {matrix.shape}")
    return np.log1p(np.maximum(matrix, 0))


def reference_aggregate(saturated: np.ndarray, mode: str) -> np.ndarray:
    """Collapse token rows to one weight per vocabulary id (max or sum)."""
    if mode == "max":
        return saturated.max(axis=0)
    if mode == "sum":
        return saturated.sum(axis=0)
    raise BridgeError(f"unknown aggregation mode {mode!r}")


def reference_topk(weights: np.ndarray, k: int) -> dict[int, float]:
    """Keep the k largest positive weights; ties go to the smaller token id."""
    if k < 1:
        raise BridgeError(f"k must be >= 1, got {k}")
    weights = np.asarray(weights, dtype=np.float32)
    order = np.argsort(-weights.astype(np.float64), kind="stable")[:k]
    order = order[weights[order] > 0]
    return {int(tid): float(weights[tid]) for tid in np.sort(order)}


def reference_encode(matrix: np.ndarray, k: int, aggregation: str) -> dict[int, float]:
    """The full pipeline: token id -> float32 weight, ascending ids."""
    return reference_topk(reference_aggregate(reference_saturate(matrix), aggregation), k)


# ---------------------------------------------------------------------------
# Engine invocation
# ---------------------------------------------------------------------------


def engine_command() -> list[str]:
    """The argv prefix that launches the ranking engine CLI.

    Defaults to running the ``hybridrank`` module under the current
    interpreter; override with the ENCODER_BRIDGE_ENGINE env var.
    """
    override = os.environ.get(ENGINE_ENV)
    if override:
        return shlex.split(override)
    return [sys.executable, "-m", "hybridrank"]


def run_engine(args: list[str]) -> subprocess.CompletedProcess:
    """Run one engine subcommand, raising on nonzero exit."""
    cmd = engine_command() + list(args)
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except OSError as exc:
        raise EngineInvocationError(f"cannot launch engine {cmd[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout).strip().splitlines()[-5:]
        raise EngineInvocationError(
            f"engine exited {proc.returncode} for {' '.join(args[:1])}: " + " | ".join(tail)
        )
    return proc


def engine_encode(
    logit_path, manifest_path, dense_path, output_path, k: int, aggregation: str = "max"
) -> None:
    """Ask the engine to sparsify an exported batch into representation JSONL."""
    run_engine(
        [
            "encode",
            "--logits",
            str(logit_path),
            "--manifest",
            str(manifest_path),
            "--dense",
            str(dense_path),
            "--k",
            str(k),
            "--aggregation",
            aggregation,
            "--output",
            str(output_path),
        ]
    )


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    """One token whose weight disagrees between engine and reference."""

    item_id: str
    token_id: int
    engine_weight: float | None  # None: token absent on the engine side
    reference_weight: float | None  # None: token absent in the reference


@dataclass
class ParityReport:
    """Outcome of comparing an engine encode run against the reference."""

    items_checked: int
    tolerance: float
    max_abs_deviation: float
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "items_checked": self.items_checked,
            "tolerance": self.tolerance,
            "max_abs_deviation": self.max_abs_deviation,
            "ok": self.ok,
            "mismatches": [asdict(m) for m in self.mismatches],
        }


def parity_check(
    logit_path,
    manifest_path,
    reps_path,
    k: int,
    aggregation: str = "max",
    tolerance: float = DEFAULT_TOLERANCE,
    dense_path=None,
) -> ParityReport:
    """Compare the engine's representations against the bridge's own pipeline.

    When ``dense_path`` is given, the dense vectors in the JSONL are also
    required to round-trip the exported file exactly (float32 values survive
    JSON unchanged); a disagreement there is reported under token id -1.
    """
    matrices = formats.read_logit_records(logit_path)
    manifest = formats.read_sidecar_manifest(manifest_path)
    reps = formats.read_engine_reps(reps_path)
    if not (len(matrices) == len(manifest) == len(reps)):
        raise BridgeError(
            f"record count mismatch: {len(matrices)} logit records, "
            f"{len(manifest)} manifest entries, {len(reps)} representations"
        )
    dense = formats.read_dense_matrix(dense_path) if dense_path is not None else None

    report = ParityReport(items_checked=len(reps), tolerance=tolerance, max_abs_deviation=0.0)
    for pos, (matrix, meta, rep) in enumerate(zip(matrices, manifest, reps)):
        item_id = str(meta["id"])
        if str(rep["id"]) != item_id:
            raise BridgeError(
                f"record {pos}: engine output id {rep['id']!r} does not match manifest id {item_id!r}"
            )
        want = reference_encode(matrix, k, aggregation)
        got = rep["sparse"]
        for tid in sorted(set(want) | set(got)):
            e, r = got.get(tid), want.get(tid)
            if e is None or r is None:
                report.mismatches.append(Mismatch(item_id, tid, e, r))
                continue
            delta = abs(e - r)
            report.max_abs_deviation = max(report.max_abs_deviation, delta)
            if delta > tolerance:
                report.mismatches.append(Mismatch(item_id, tid, e, r))
        if dense is not None:
            got_dense = np.asarray(rep["dense"], dtype=np.float64)
            want_dense = dense[pos].astype(np.float64)
            if got_dense.shape != want_dense.shape or not np.array_equal(got_dense, want_dense):
                report.mismatches.append(Mismatch(item_id, -1, None, None))
    return report
