"""Transformer token-classification bridge for the tagging toolkit.

Fine-tunes per-feature or whole-tag classifiers over the toolkit's corpus
format and exports per-token probability distributions in its interchange
format; the two packages share files, not code.
"""
from .base_model import build_tiny_base_model
from .errors import AlignmentError, BridgeError, FormatError
from .export import (
    Artifact,
    compute_distributions,
    export_distributions,
    load_artifact,
    predictions,
)
from .formats import (
    Feature,
    Schema,
    Sentence,
    SentenceDistribution,
    TokenDistribution,
    load_schema,
    read_sentences,
    write_distributions,
)
from .training import (
    FACTORED,
    KINDS,
    UNFACTORED,
    BridgeConfig,
    finetune,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
