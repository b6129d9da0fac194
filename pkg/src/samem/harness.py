"""Synthetic episodes, replay of the memory over a trace, and retention metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from samem.core import SaMemConfig, StepReport, empty_memory, step
from samem.embedding import mean_pool, row_cosines
from samem.maintenance import MemoryState
from samem.oracles import OracleAuditor
from samem.prng import SplitMix64
from samem.trace import EpisodeTrace

# expected distance of planted / instruction tokens from the instruction direction, before renormalizing
PLANT_SPREAD = 0.5
INSTRUCTION_SPREAD = 0.1
# fraction of the gap to its anchor a planted token closes per frame
PLANT_PULL = 0.5


def _unit(v: list[float]) -> list[float]:
    n = math.sqrt(math.fsum(x * x for x in v))
    return [x / n for x in v] if n > 0 else v


def _axpy(a: float, x: list[float], y: list[float]) -> list[float]:
    return [a * xi + yi for xi, yi in zip(x, y)]


def generate_synthetic(
    seed: int,
    n_frames: int,
    tokens_per_frame: int,
    dim: int,
    drift: float = 0.1,
    planted_relevant_fraction: float = 0.0,
    instruction_tokens: int = 4,
) -> EpisodeTrace:
    """Deterministic synthetic episode driven entirely by a SplitMix64 stream.

    Every token follows a random walk on the unit sphere with step length
    about ``drift``. A ``planted_relevant_fraction`` of token slots (fixed per
    episode) start near the instruction direction and are pulled back toward
    their anchor each frame, so relevance scores carry signal.
    """
    for name, v in (("n_frames", n_frames), ("tokens_per_frame", tokens_per_frame), ("dim", dim), ("instruction_tokens", instruction_tokens)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    if not 0.0 <= drift <= 1.0:
        raise ValueError("drift must lie in [0, 1]")
    if not 0.0 <= planted_relevant_fraction <= 1.0:
        raise ValueError("planted_relevant_fraction must lie in [0, 1]")

    rng = SplitMix64(seed)
    step_scale = drift / math.sqrt(dim)
    u = _unit(rng.gauss_vector(dim))
    per_coord = 1.0 / math.sqrt(dim)
    instruction = [_unit(_axpy(INSTRUCTION_SPREAD * per_coord, rng.gauss_vector(dim), u)) for _ in range(instruction_tokens)]

    n_planted = round(planted_relevant_fraction * tokens_per_frame)
    slots = list(range(tokens_per_frame))
    for i in range(tokens_per_frame - 1, 0, -1):  # Fisher-Yates
        j = rng.randbelow(i + 1)
        slots[i], slots[j] = slots[j], slots[i]
    planted = sorted(slots[:n_planted])
    planted_set = set(planted)

    anchors: dict[int, list[float]] = {}
    state: list[list[float]] = []
    for j in range(tokens_per_frame):
        if j in planted_set:
            anchors[j] = _unit(_axpy(PLANT_SPREAD * per_coord, rng.gauss_vector(dim), u))
            state.append(anchors[j])
        else:
            state.append(_unit(rng.gauss_vector(dim)))

    frames = []
    for t in range(n_frames):
        if t > 0:
            nxt = []
            for j, x in enumerate(state):
                y = _axpy(step_scale, rng.gauss_vector(dim), x)
                if j in anchors:
                    y = [yi + PLANT_PULL * (ai - xi) for yi, ai, xi in zip(y, anchors[j], x)]
                nxt.append(_unit(y))
            state = nxt
        frames.append(state)

    meta = {
        "generator": "splitmix64-sphere-walk",
        "seed": seed,
        "drift": drift,
        "planted_relevant_fraction": planted_relevant_fraction,
        "planted_slots": planted,
    }
    return EpisodeTrace(instruction=instruction, frames=frames, metadata=meta)


@dataclass
class RetentionMetrics:
    inst_cosine: list[float] = field(default_factory=list)
    cur_cosine: list[float] = field(default_factory=list)
    tokens: list[int] = field(default_factory=list)
    raw_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.tokens[-1] if self.tokens else 0

    @property
    def compression_ratio(self) -> float:
        return self.total_tokens / self.raw_tokens if self.raw_tokens else 1.0

    @property
    def mean_inst_cosine(self) -> float:
        return float(np.mean(self.inst_cosine)) if self.inst_cosine else 0.0

    @property
    def mean_cur_cosine(self) -> float:
        return float(np.mean(self.cur_cosine)) if self.cur_cosine else 0.0

    def as_dict(self) -> dict:
        return {
            "inst_cosine": self.inst_cosine,
            "cur_cosine": self.cur_cosine,
            "tokens": self.tokens,
            "total_tokens": self.total_tokens,
            "raw_tokens": self.raw_tokens,
            "compression_ratio": self.compression_ratio,
            "mean_inst_cosine": self.mean_inst_cosine,
            "mean_cur_cosine": self.mean_cur_cosine,
        }


def memory_cosines(mem: MemoryState, instruction, current) -> tuple[float, float]:
    """Mean cosine of every retained token to the instruction mean and the current-frame mean."""
    tokens = np.concatenate(mem.frames, axis=0)
    return (
        float(row_cosines(tokens, mean_pool(instruction)).mean()),
        float(row_cosines(tokens, mean_pool(current)).mean()),
    )


@dataclass
class ReplayResult:
    reports: list[StepReport]
    metrics: RetentionMetrics
    memory: MemoryState
    oracle_checks: int = 0


def replay(trace: EpisodeTrace, cfg: SaMemConfig, oracle_mode: bool = False) -> ReplayResult:
    """Run the memory over every frame of ``trace`` in order.

    With ``oracle_mode`` each compression and maintenance decision is
    re-derived by brute force; a mismatch raises
    :class:`~samem.oracles.OracleDivergence`.
    """
    instruction = trace.instruction.astype(np.float64)
    auditor = OracleAuditor() if oracle_mode else None
    mem = empty_memory(cfg)
    reports = []
    metrics = RetentionMetrics()
    for frame in trace.frames:
        current = frame.astype(np.float64)
        mem, rep = step(mem, current, instruction, cfg, audit=auditor)
        reports.append(rep)
        inst_c, cur_c = memory_cosines(mem, instruction, current)
        metrics.inst_cosine.append(inst_c)
        metrics.cur_cosine.append(cur_c)
        metrics.tokens.append(sum(rep.tokens_per_frame))
        metrics.raw_tokens += frame.shape[0]
    return ReplayResult(reports, metrics, mem, auditor.checks if auditor else 0)
