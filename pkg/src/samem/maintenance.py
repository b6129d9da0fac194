"""Capacity enforcement for the memory: removal or fusion, chosen temporally or by relevance."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from samem.compression import DEFAULT_BUDGET
from samem.embedding import adaptive_avg_pool, as_matrix, mean_pool, row_cosines


class Operation(str, enum.Enum):
    REMOVAL = "remove"
    FUSION = "fuse"


class Criterion(str, enum.Enum):
    TEMPORAL = "temporal"
    RELEVANCE = "relevance"


@dataclass(frozen=True)
class FusionWeights:
    w_txt: float = 0.3
    w_adj: float = 0.4
    w_cur: float = 0.3

    def __post_init__(self):
        for name in ("w_txt", "w_adj", "w_cur"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {w}")


@dataclass(frozen=True)
class MaintenancePolicy:
    operation: Operation = Operation.FUSION
    criterion: Criterion = Criterion.RELEVANCE
    weights: FusionWeights = field(default_factory=FusionWeights)
    budget_k: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "operation", Operation(self.operation))
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        if self.budget_k < 1:
            raise ValueError("budget_k must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.operation.value}+{self.criterion.value}"


@dataclass(frozen=True)
class RemoveFrame:
    index: int

    def as_dict(self) -> dict:
        return {"kind": "remove", "index": self.index}


@dataclass(frozen=True)
class FusePair:
    index: int

    def as_dict(self) -> dict:
        return {"kind": "fuse", "index": self.index}


Action = Union[RemoveFrame, FusePair]


def _frozen(m) -> np.ndarray:
    arr = as_matrix(m, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MemoryState:
    """Ordered frames plus the global timestamps folded into each frame.

    ``t_global`` is the timestamp the next appended frame will receive.
    """

    frames: tuple = ()
    source_indices: tuple = ()
    m_max: int = 8
    t_global: int = 0

    def __post_init__(self):
        frames = tuple(f if isinstance(f, np.ndarray) and not f.flags.writeable else _frozen(f) for f in self.frames)
        sources = tuple(tuple(int(i) for i in s) for s in self.source_indices)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "source_indices", sources)
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if len(frames) != len(sources):
            raise ValueError("frames and source_indices differ in length")
        if len({f.shape[1] for f in frames}) > 1:
            raise ValueError("frames disagree on token dimension")
        flat = [i for s in sources for i in s]
        if any(not s for s in sources):
            raise ValueError("every frame needs at least one source index")
        if any(b <= a for a, b in zip(flat, flat[1:])):
            raise ValueError("source indices must be strictly ascending across frames")
        if flat and self.t_global <= flat[-1]:
            raise ValueError("t_global must exceed every stored source index")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int | None:
        return self.frames[0].shape[1] if self.frames else None

    @property
    def tokens_per_frame(self) -> list[int]:
        return [f.shape[0] for f in self.frames]

    def replace(self, **changes) -> "MemoryState":
        kw = dict(frames=self.frames, source_indices=self.source_indices, m_max=self.m_max, t_global=self.t_global)
        kw.update(changes)
        return MemoryState(**kw)


def _pair_scores(means: np.ndarray, t_bar: np.ndarray | None, c_bar: np.ndarray, weights: FusionWeights) -> np.ndarray:
    norms = np.linalg.norm(means, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = means / safe[:, None]
    unit[norms == 0] = 0.0
    adj = np.clip(np.sum(unit[:-1] * unit[1:], axis=1), -1.0, 1.0)
    p = weights.w_adj * adj
    if t_bar is not None:
        s_t = row_cosines(means, t_bar)
        p = p + weights.w_txt * (1.0 - (s_t[:-1] + s_t[1:]) / 2.0)
    s_c = row_cosines(means, c_bar)
    p = p + weights.w_cur * (1.0 - (s_c[:-1] + s_c[1:]) / 2.0)
    return p


def pair_fusion_scores(mem: MemoryState, instruction, current, weights: FusionWeights = FusionWeights()) -> np.ndarray:
    """Fusion probability of every adjacent pair ``(i, i+1)``.

    ``instruction`` may be ``None``, in which case the instruction term is
    skipped.
    """
    if len(mem) < 2:
        raise ValueError("nothing to merge")
    means = np.stack([f.mean(axis=0) for f in mem.frames])
    t_bar = None if instruction is None else mean_pool(instruction)
    c_bar = mean_pool(current)
    for v in (t_bar, c_bar):
        if v is not None and v.shape[0] != means.shape[1]:
            raise ValueError(f"dimension mismatch: {v.shape[0]} vs {means.shape[1]}")
    return _pair_scores(means, t_bar, c_bar, weights)


def find_merge_pair(mem: MemoryState, instruction, current, weights: FusionWeights = FusionWeights()) -> int:
    """Index ``i`` of the adjacent pair with the highest fusion probability (first on ties)."""
    return int(np.argmax(pair_fusion_scores(mem, instruction, current, weights)))


def merge_pair(mem: MemoryState, i: int, budget_k: int = DEFAULT_BUDGET) -> MemoryState:
    """Concatenate frames ``i`` and ``i+1`` and pool them down to at most ``budget_k`` tokens."""
    if not 0 <= i < len(mem) - 1:
        raise IndexError(f"no adjacent pair at index {i} in memory of {len(mem)} frames")
    merged = np.concatenate([mem.frames[i], mem.frames[i + 1]], axis=0)
    pooled = adaptive_avg_pool(merged, min(budget_k, merged.shape[0]))
    frames = mem.frames[:i] + (pooled,) + mem.frames[i + 2 :]
    sources = mem.source_indices[:i] + (mem.source_indices[i] + mem.source_indices[i + 1],) + mem.source_indices[i + 2 :]
    return mem.replace(frames=frames, source_indices=sources)


def remove_frame(mem: MemoryState, j: int) -> MemoryState:
    if not 0 <= j < len(mem):
        raise IndexError(f"no frame at index {j} in memory of {len(mem)} frames")
    return mem.replace(
        frames=mem.frames[:j] + mem.frames[j + 1 :],
        source_indices=mem.source_indices[:j] + mem.source_indices[j + 1 :],
    )


def temporal_gaps(source_indices: Sequence[Sequence[int]]) -> list[int]:
    """Gap between the last timestamp of each frame and the first of the next."""
    return [nxt[0] - cur[-1] for cur, nxt in zip(source_indices, source_indices[1:])]


def frame_removal_scores(mem: MemoryState, instruction, current) -> np.ndarray:
    """Single-frame irrelevance: the instruction and current terms of the pair score at 0.5 each."""
    means = np.stack([f.mean(axis=0) for f in mem.frames])
    s_t = row_cosines(means, mean_pool(instruction))
    s_c = row_cosines(means, mean_pool(current))
    return 0.5 * (1.0 - s_t) + 0.5 * (1.0 - s_c)


def select_maintenance_target(mem: MemoryState, instruction, current, policy: MaintenancePolicy) -> Action:
    """Pick the one removal or fusion that brings an over-capacity memory back by one frame."""
    if len(mem) <= mem.m_max:
        raise ValueError("maintenance not required")
    op, crit = policy.operation, policy.criterion
    if crit is Criterion.TEMPORAL:
        i = int(np.argmin(temporal_gaps(mem.source_indices)))
        return RemoveFrame(i + 1) if op is Operation.REMOVAL else FusePair(i)
    if op is Operation.REMOVAL:
        return RemoveFrame(int(np.argmax(frame_removal_scores(mem, instruction, current))))
    return FusePair(find_merge_pair(mem, instruction, current, policy.weights))


def apply_maintenance(mem: MemoryState, action: Action, budget_k: int = DEFAULT_BUDGET) -> MemoryState:
    if isinstance(action, RemoveFrame):
        return remove_frame(mem, action.index)
    return merge_pair(mem, action.index, budget_k)
