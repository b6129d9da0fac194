"""One memory update per incoming observation: compress the tail, maintain capacity, append."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from samem.compression import CompressionStrategy, compress_indices
from samem.embedding import as_matrix
from samem.maintenance import (
    FusionWeights,
    MaintenancePolicy,
    MemoryState,
    apply_maintenance,
    select_maintenance_target,
)

# audit(operation_name, payload) is called after each decision; it may raise to abort the step
Audit = Callable[[str, dict], None]


@dataclass(frozen=True)
class SaMemConfig:
    m_max: int = 8
    compression: CompressionStrategy = field(default_factory=CompressionStrategy)
    policy: MaintenancePolicy = field(default_factory=MaintenancePolicy)

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if self.compression.budget_k != self.policy.budget_k:
            raise ValueError(
                f"compression budget {self.compression.budget_k} != maintenance budget {self.policy.budget_k}"
            )

    @property
    def budget_k(self) -> int:
        return self.compression.budget_k

    @classmethod
    def build(
        cls,
        m_max: int = 8,
        budget_k: int = 30,
        variant: str = "inst-cur",
        operation: str = "fuse",
        criterion: str = "relevance",
        weights=None,
    ) -> "SaMemConfig":
        return cls(
            m_max=m_max,
            compression=CompressionStrategy(variant, budget_k),
            policy=MaintenancePolicy(operation, criterion, weights or FusionWeights(), budget_k),
        )


@dataclass
class StepReport:
    step_index: int
    frames_after: int
    tokens_per_frame: list[int]
    maintenance_action: Optional[dict] = None
    compression_applied: bool = False
    # (segment, token count) in the order the sequence model would consume them
    sequence_manifest: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.tokens_per_frame) != self.frames_after:
            raise ValueError("tokens_per_frame must have one entry per frame")

    def as_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "frames_after": self.frames_after,
            "tokens_per_frame": list(self.tokens_per_frame),
            "maintenance_action": self.maintenance_action,
            "compression_applied": self.compression_applied,
            "sequence_manifest": [list(x) for x in self.sequence_manifest],
        }


def empty_memory(cfg: SaMemConfig) -> MemoryState:
    return MemoryState(m_max=cfg.m_max)


def step(
    mem: MemoryState,
    current,
    instruction,
    cfg: SaMemConfig,
    *,
    audit: Audit | None = None,
) -> tuple[MemoryState, StepReport]:
    """Advance the memory by one observation.

    The tail frame is compressed against the new observation, at most one
    maintenance action runs if the memory is over ``cfg.m_max``, and the
    uncompressed observation is appended with the next global timestamp.
    """
    current = as_matrix(current, copy=True)
    instruction = as_matrix(instruction)
    if current.shape[1] != instruction.shape[1]:
        raise ValueError(f"dimension mismatch: current {current.shape[1]} vs instruction {instruction.shape[1]}")
    if mem.dim is not None and mem.dim != current.shape[1]:
        raise ValueError(f"dimension mismatch: memory {mem.dim} vs current {current.shape[1]}")
    if mem.frames and cfg.m_max < mem.m_max:
        raise ValueError("m_max may not be decreased on a live memory")
    mem = mem.replace(m_max=cfg.m_max)

    compressed = False
    if mem.frames:
        tail = mem.frames[-1]
        keep = compress_indices(tail, instruction, current, cfg.compression)
        if audit is not None:
            audit("compress_frame", dict(prev=tail, instruction=instruction, current=current,
                                         strategy=cfg.compression, selected=keep, step=mem.t_global))
        if len(keep) < tail.shape[0]:
            mem = mem.replace(frames=mem.frames[:-1] + (tail[keep],))
            compressed = True

    action = None
    if len(mem) > mem.m_max:
        action = select_maintenance_target(mem, instruction, current, cfg.policy)
        if audit is not None:
            audit("select_maintenance_target", dict(mem=mem, instruction=instruction, current=current,
                                                    policy=cfg.policy, action=action, step=mem.t_global))
        mem = apply_maintenance(mem, action, cfg.budget_k)

    t = mem.t_global
    mem = mem.replace(
        frames=mem.frames + (current,),
        source_indices=mem.source_indices + ((t,),),
        t_global=t + 1,
    )
    tokens = mem.tokens_per_frame
    manifest = [("history", n) for n in tokens[:-1]] + [("current", tokens[-1]), ("instruction", instruction.shape[0])]
    report = StepReport(
        step_index=t,
        frames_after=len(mem),
        tokens_per_frame=tokens,
        maintenance_action=None if action is None else action.as_dict(),
        compression_applied=compressed,
        sequence_manifest=manifest,
    )
    return mem, report


def run(frames, instruction, cfg: SaMemConfig, *, audit: Audit | None = None):
    """Feed ``frames`` through :func:`step` from an empty memory; returns the final state and reports."""
    mem = empty_memory(cfg)
    reports = []
    for f in frames:
        mem, rep = step(mem, f, instruction, cfg, audit=audit)
        reports.append(rep)
    return mem, reports
