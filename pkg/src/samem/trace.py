"""Binary episode traces.

Layout (little-endian)::

    b"SAMEMTR1"                    magic, 8 bytes
    u32 version                    currently 1
    u32 D                          token dimension
    u32 n_frames
    u32 instruction token count
    u8  flags                      bit0 poses present, bit1 actions present
    f32[count*D]                   instruction tokens
    per frame:
        u32 token count
        f32[count*D]               tokens
        f32[3]                     pose x (m), y (m), heading (deg)   if bit0
        u8                         action code                        if bit1
    u32 metadata length
    UTF-8 JSON object              metadata

Action codes index :data:`ACTION_CODES`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from samem.action_parse import Action

MAGIC = b"SAMEMTR1"
VERSION = 1
FLAG_POSES = 0x01
FLAG_ACTIONS = 0x02
ACTION_CODES: tuple[str, ...] = tuple(a.value for a in Action)


class TraceFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


def _f32_matrix(m, dim: int | None = None) -> np.ndarray:
    arr = np.array(m, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("token matrices must be non-empty 2-D")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: {arr.shape[1]} vs {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("token matrix contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass
class EpisodeTrace:
    """Frame embeddings plus instruction for one episode, stored at float32 precision."""

    instruction: np.ndarray
    frames: list
    poses: Optional[list] = None
    actions: Optional[list] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.instruction = _f32_matrix(self.instruction)
        d = self.instruction.shape[1]
        self.frames = [_f32_matrix(f, d) for f in self.frames]
        if self.poses is not None:
            if len(self.poses) != len(self.frames):
                raise ValueError("poses must be 1:1 with frames")
            self.poses = [tuple(float(v) for v in np.asarray(p, dtype=np.float32)) for p in self.poses]
            if any(len(p) != 3 for p in self.poses):
                raise ValueError("a pose is (x, y, heading)")
        if self.actions is not None:
            if len(self.actions) != len(self.frames):
                raise ValueError("actions must be 1:1 with frames")
            self.actions = [Action(str(getattr(a, "value", a)).upper()).value for a in self.actions]
        self.metadata = dict(self.metadata)

    @property
    def dim(self) -> int:
        return self.instruction.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeTrace):
            return NotImplemented
        return (
            np.array_equal(self.instruction, other.instruction)
            and len(self.frames) == len(other.frames)
            and all(np.array_equal(a, b) for a, b in zip(self.frames, other.frames))
            and self.poses == other.poses
            and self.actions == other.actions
            and self.metadata == other.metadata
        )


def encode_trace(trace: EpisodeTrace) -> bytes:
    flags = (FLAG_POSES if trace.poses is not None else 0) | (FLAG_ACTIONS if trace.actions is not None else 0)
    out = [MAGIC, struct.pack("<IIIIB", VERSION, trace.dim, len(trace.frames), trace.instruction.shape[0], flags)]
    out.append(trace.instruction.astype("<f4").tobytes())
    for i, frame in enumerate(trace.frames):
        out.append(struct.pack("<I", frame.shape[0]))
        out.append(frame.astype("<f4").tobytes())
        if trace.poses is not None:
            out.append(struct.pack("<3f", *trace.poses[i]))
        if trace.actions is not None:
            out.append(struct.pack("<B", ACTION_CODES.index(trace.actions[i])))
    blob = json.dumps(trace.metadata, sort_keys=True, ensure_ascii=False).encode("utf-8")
    out.append(struct.pack("<I", len(blob)))
    out.append(blob)
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TraceFormatError(f"truncated trace while reading {what}: need {n} bytes, have {len(self.data) - self.pos}", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def matrix(self, count: int, dim: int, what: str) -> np.ndarray:
        arr = np.frombuffer(self.take(4 * count * dim, what), dtype="<f4").astype(np.float32).reshape(count, dim)
        return arr


def decode_trace(data: bytes) -> EpisodeTrace:
    r = _Reader(data)
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise TraceFormatError("not a trace file", 0)
    r.pos = len(MAGIC)
    version_at = r.pos
    version, dim, n_frames, n_inst, flags = r.unpack("<IIIIB", "header")
    if version != VERSION:
        raise TraceFormatError(f"unsupported trace version {version}", version_at)
    if dim == 0 or n_inst == 0:
        raise TraceFormatError("empty dimension or instruction", version_at)
    if flags & ~(FLAG_POSES | FLAG_ACTIONS):
        raise TraceFormatError(f"unknown flag bits {flags:#x}", r.pos - 1)
    instruction = r.matrix(n_inst, dim, "instruction tokens")
    frames, poses, actions = [], [], []
    for i in range(n_frames):
        at = r.pos
        (count,) = r.unpack("<I", f"frame {i} token count")
        if count == 0:
            raise TraceFormatError(f"frame {i} has no tokens", at)
        frames.append(r.matrix(count, dim, f"frame {i} tokens"))
        if flags & FLAG_POSES:
            poses.append(r.unpack("<3f", f"frame {i} pose"))
        if flags & FLAG_ACTIONS:
            at = r.pos
            (code,) = r.unpack("<B", f"frame {i} action")
            if code >= len(ACTION_CODES):
                raise TraceFormatError(f"unknown action code {code}", at)
            actions.append(ACTION_CODES[code])
    (blob_len,) = r.unpack("<I", "metadata length")
    at = r.pos
    blob = r.take(blob_len, "metadata")
    try:
        metadata = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"bad metadata: {exc}", at) from None
    if not isinstance(metadata, dict):
        raise TraceFormatError("metadata must be a JSON object", at)
    if r.pos != len(data):
        raise TraceFormatError(f"{len(data) - r.pos} trailing bytes", r.pos)
    try:
        return EpisodeTrace(
            instruction=instruction,
            frames=frames,
            poses=poses if flags & FLAG_POSES else None,
            actions=actions if flags & FLAG_ACTIONS else None,
            metadata=metadata,
        )
    except ValueError as exc:
        raise TraceFormatError(str(exc), 0) from None


def write_trace(trace: EpisodeTrace, path) -> None:
    Path(path).write_bytes(encode_trace(trace))


def read_trace(path) -> EpisodeTrace:
    return decode_trace(Path(path).read_bytes())
