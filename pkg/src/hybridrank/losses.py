"""Forward values of the training objective, for monitoring and parity checks.

No gradients live here: encoder training is out of scope.  The functions
exist so an external trainer's loss numbers can be verified against a
trusted reference.  All accumulation happens in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .representations import SparseRep
from .scoring import dot_dense, dot_sparse


@dataclass(frozen=True)
class LossConfig:
    """Temperature and the two sparsity-regularizer weights."""

    tau: float = 1.0
    lambda_q: float = 3e-4
    lambda_c: float = 1e-4

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.lambda_q < 0 or self.lambda_c < 0:
            raise ConfigError("regularizer weights must be nonnegative")


@dataclass
class RepPair:
    """One item's dense vector plus sparse lexical representation."""

    dense: np.ndarray
    sparse: SparseRep

    @classmethod
    def from_dict(cls, obj: dict) -> "RepPair":
        return cls(
            np.asarray(obj["dense"], dtype=np.float32),
            SparseRep.from_dict(obj.get("sparse", {})),
        )


@dataclass
class TrainingInstance:
    """A query with one positive candidate and b >= 1 negatives."""

    query: RepPair
    positive: RepPair
    negatives: list[RepPair]

    def __post_init__(self):
        if len(self.negatives) < 1:
            raise ValidationError("a training instance needs at least one negative")
        h = len(self.query.dense)
        for rep in [self.positive, *self.negatives]:
            if len(rep.dense) != h:
                raise DimensionError(
                    f"dense size mismatch within instance: {len(rep.dense)} vs {h}"
                )


def contrastive_loss(pos_score: float, neg_scores, tau: float = 1.0) -> float:
    """Softmax cross-entropy of the positive against the negatives.

    Computed via log-sum-exp so extreme score/temperature ratios stay finite:
    loss = logsumexp(all / tau) - pos / tau.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if neg_scores.size < 1:
        raise ValidationError("at least one negative score is required")
    scaled = np.concatenate(([pos_score], neg_scores)) / tau
    m = scaled.max()
    lse = m + np.log(np.sum(np.exp(scaled - m)))
    return float(lse - scaled[0])


def flops_reg(batch) -> float:
    """Squared-mean-activation sparsity penalty over a batch of weight vectors.

    Accepts dense weight vectors or SparseRep objects (implicitly zero-filled);
    absent terms contribute nothing, so no vocabulary size is needed for
    sparse input.
    """
    if len(batch) == 0:
        raise ValidationError("flops_reg needs a nonempty batch")
    n = len(batch)
    dense_lengths = {len(item) for item in batch if not isinstance(item, SparseRep)}
    if len(dense_lengths) > 1:
        raise DimensionError("all weight vectors in a batch must share |V|")
    sums: dict[int, float] = {}
    for item in batch:
        if isinstance(item, SparseRep):
            ids, weights = item.token_ids, item.weights.astype(np.float64)
        else:
            arr = np.asarray(item, dtype=np.float64)
            ids = np.nonzero(arr)[0]
            weights = arr[ids]
        for t, w in zip(ids, weights):
            sums[int(t)] = sums.get(int(t), 0.0) + float(w)
    return float(sum((s / n) ** 2 for _, s in sorted(sums.items())))


def total_loss(
    dense_rank_loss: float,
    lexical_rank_loss: float,
    reg_q: float,
    reg_c: float,
    cfg: LossConfig,
) -> float:
    """Weighted combination of the two ranking losses and the two regularizers."""
    return (
        dense_rank_loss
        + lexical_rank_loss
        + cfg.lambda_q * reg_q
        + cfg.lambda_c * reg_c
    )


def instance_loss(inst: TrainingInstance, cfg: LossConfig) -> tuple[float, float, float]:
    """Per-instance contrastive losses on dense and lexical scores.

    Returns (dense_loss, lexical_loss, their sum); regularizers are applied
    separately at the batch level.
    """
    pos_dense = dot_dense(inst.query.dense, inst.positive.dense)
    neg_dense = [dot_dense(inst.query.dense, n.dense) for n in inst.negatives]
    pos_lex = dot_sparse(inst.query.sparse, inst.positive.sparse)
    neg_lex = [dot_sparse(inst.query.sparse, n.sparse) for n in inst.negatives]
    dense_loss = contrastive_loss(pos_dense, neg_dense, cfg.tau)
    lexical_loss = contrastive_loss(pos_lex, neg_lex, cfg.tau)
    return dense_loss, lexical_loss, dense_loss + lexical_loss


def read_instances(path) -> list[TrainingInstance]:
    """Read training instances from JSONL: {"query", "positive", "negatives"}."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_no}: invalid JSON ({exc})") from None
            instances.append(
                TrainingInstance(
                    RepPair.from_dict(obj["query"]),
                    RepPair.from_dict(obj["positive"]),
                    [RepPair.from_dict(n) for n in obj["negatives"]],
                )
            )
    return instances
