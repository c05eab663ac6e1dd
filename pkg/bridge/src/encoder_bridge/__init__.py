"""Bridge from a masked language model to the ranking engine's file formats.

Runs MLM inference over texts, exports per-token vocabulary logit matrices
(HLGT records), summary dense vectors, and the sidecar manifest that the
engine's ``encode`` subcommand consumes — then, going the other way,
verifies the engine's sparse output against an independent reimplementation
of the saturate/aggregate/top-k pipeline.  The engine is driven solely
through its command line.
"""

from .encoder import DEFAULT_MAX_LEN, EncoderOutput, MlmEncoder, TextItem
from .errors import BridgeError, BridgeFormatError, EngineInvocationError
from .export import ExportConfig, ExportResult, export, read_text_items, write_outputs
from .parity import (
    DEFAULT_TOLERANCE,
    Mismatch,
    ParityReport,
    engine_command,
    engine_encode,
    parity_check,
    reference_aggregate,
    reference_encode,
    reference_saturate,
    reference_topk,
    run_engine,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAX_LEN",
    "DEFAULT_TOLERANCE",
    "BridgeError",
    "BridgeFormatError",
    "EncoderOutput",
    "EngineInvocationError",
    "ExportConfig",
    "ExportResult",
    "Mismatch",
    "MlmEncoder",
    "ParityReport",
    "TextItem",
    "engine_command",
    "engine_encode",
    "export",
    "parity_check",
    "read_text_items",
    "reference_aggregate",
    "reference_encode",
    "reference_saturate",
    "reference_topk",
    "run_engine",
    "write_outputs",
]
