"""Hybrid sparse-dense ranking engine.

Encodes masked-language-model logit matrices into top-k sparse lexical
representations, combines them with dense vectors under a single
interpolation weight, and serves ranked retrieval with evaluation,
significance testing, token-level explanations, and cost accounting.
"""

__version__ = "0.1.0"

from .errors import (
    ChecksumError,
    ConfigError,
    DimensionError,
    FormatError,
    NotApplicableError,
    TruncatedFileError,
    ValidationError,
    VersionError,
)
from .representations import EncodeConfig, SparseRep, aggregate, encode, saturate, topk_sparsify
from .scoring import ScoredCandidate, ScoringConfig, hybrid_score, rank, source_aware_rescale
from .losses import LossConfig, TrainingInstance, contrastive_loss, flops_reg, total_loss
from .index import HybridEntry, HybridIndex, build, load, save
from .evaluation import MetricReport, evaluate, fisher_randomization, paired_t_test
from .bm25 import CorpusStats, NormalizationRules, bm25_rank, normalize
from .explain import MatchReport, match_report, render
from .resources import CostModelParams, cost_table, interaction_flops, storage_per_item

__all__ = [
    "__version__",
    "ChecksumError",
    "ConfigError",
    "DimensionError",
    "FormatError",
    "NotApplicableError",
    "TruncatedFileError",
    "ValidationError",
    "VersionError",
    "EncodeConfig",
    "SparseRep",
    "aggregate",
    "encode",
    "saturate",
    "topk_sparsify",
    "ScoredCandidate",
    "ScoringConfig",
    "hybrid_score",
    "rank",
    "source_aware_rescale",
    "LossConfig",
    "TrainingInstance",
    "contrastive_loss",
    "flops_reg",
    "total_loss",
    "HybridEntry",
    "HybridIndex",
    "build",
    "load",
    "save",
    "MetricReport",
    "evaluate",
    "fisher_randomization",
    "paired_t_test",
    "CorpusStats",
    "NormalizationRules",
    "bm25_rank",
    "normalize",
    "MatchReport",
    "match_report",
    "render",
    "CostModelParams",
    "cost_table",
    "interaction_flops",
    "storage_per_item",
]
