"""Similarity-aware memory for streaming per-frame token embeddings."""

from samem.compression import CompressionStrategy, CompressionVariant, compress_frame, score_tokens
from samem.core import SaMemConfig, StepReport, step
from samem.embedding import adaptive_avg_pool, cosine, mean_pool, top_k_indices
from samem.maintenance import (
    Criterion,
    FusePair,
    FusionWeights,
    MaintenancePolicy,
    MemoryState,
    Operation,
    RemoveFrame,
    find_merge_pair,
    merge_pair,
    select_maintenance_target,
)

__version__ = "0.1.0"

__all__ = [
    "CompressionStrategy",
    "CompressionVariant",
    "Criterion",
    "FusePair",
    "FusionWeights",
    "MaintenancePolicy",
    "MemoryState",
    "Operation",
    "RemoveFrame",
    "SaMemConfig",
    "StepReport",
    "adaptive_avg_pool",
    "compress_frame",
    "cosine",
    "find_merge_pair",
    "mean_pool",
    "merge_pair",
    "score_tokens",
    "select_maintenance_target",
    "step",
    "top_k_indices",
]
