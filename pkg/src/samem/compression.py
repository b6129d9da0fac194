"""Relevance-driven compression of the most recent historical frame."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from samem.embedding import as_matrix, mean_pool, row_cosines, top_k_indices

DEFAULT_BUDGET = 30


class CompressionVariant(str, enum.Enum):
    INSTRUCTION_PLUS_CURRENT = "inst-cur"
    INSTRUCTION_ONLY = "inst-only"


@dataclass(frozen=True)
class CompressionStrategy:
    variant: CompressionVariant = CompressionVariant.INSTRUCTION_PLUS_CURRENT
    budget_k: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "variant", CompressionVariant(self.variant))
        if self.budget_k < 1:
            raise ValueError("budget_k must be >= 1")


def _check_dims(*mats: np.ndarray) -> None:
    dims = {m.shape[1] for m in mats}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


def score_tokens(prev, instruction, current, strategy: CompressionStrategy = CompressionStrategy()) -> np.ndarray:
    """Per-token relevance of ``prev`` to the instruction and current frame.

    Each token is compared against the mean-pooled instruction and the
    mean-pooled current frame; the two cosines are averaged, or only the
    instruction cosine is kept for the instruction-only variant.
    """
    prev, instruction, current = as_matrix(prev), as_matrix(instruction), as_matrix(current)
    _check_dims(prev, instruction, current)
    s_inst = row_cosines(prev, mean_pool(instruction))
    if strategy.variant is CompressionVariant.INSTRUCTION_ONLY:
        return s_inst
    s_cur = row_cosines(prev, mean_pool(current))
    return (s_inst + s_cur) / 2.0


def compress_indices(prev, instruction, current, strategy: CompressionStrategy = CompressionStrategy()) -> list[int]:
    """Ascending indices of the tokens of ``prev`` that survive compression."""
    scores = score_tokens(prev, instruction, current, strategy)
    return top_k_indices(scores, strategy.budget_k)


def compress_frame(prev, instruction, current, strategy: CompressionStrategy = CompressionStrategy()) -> np.ndarray:
    """Keep the ``budget_k`` most relevant tokens of ``prev`` in their original order."""
    prev = as_matrix(prev)
    if prev.shape[0] <= strategy.budget_k:
        _check_dims(prev, as_matrix(instruction), as_matrix(current))
        return prev.copy()
    return prev[compress_indices(prev, instruction, current, strategy)]
