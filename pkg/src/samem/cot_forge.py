"""Desk-scale CoT dataset construction: key-frame sampling, annotation, curation, JSONL output."""

from __future__ import annotations

import json
import logging
import re
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from samem.action_parse import Action, CoTBlock
from samem.prng import SplitMix64

logger = logging.getLogger(__name__)

HORIZON = 5
DATASET_VERSION = 1

DEFAULT_HEDGING_TERMS: tuple[str, ...] = (
    "indicate", "indicates", "indicated", "indicating",
    "might",
    "may",
    "imply", "implies", "implied", "implying",
)
EXTENDED_HEDGING_TERMS: tuple[str, ...] = DEFAULT_HEDGING_TERMS + (
    "suggest", "suggests", "possibly", "perhaps",
)


@dataclass(frozen=True)
class TrajectorySource:
    """An expert trajectory; ``actions[i]`` takes frame ``i`` to frame ``i+1``."""

    frames: tuple[int, ...]
    actions: tuple[str, ...]
    instruction: str
    target: str

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))
        object.__setattr__(self, "actions", tuple(Action(str(a).upper()).value for a in self.actions))
        if len(self.actions) not in (len(self.frames) - 1, len(self.frames)):
            raise ValueError("need one action per frame transition (optionally one more for the last frame)")

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySource":
        return cls(tuple(d["frames"]), tuple(d["actions"]), d["instruction"], d["target"])


@dataclass(frozen=True)
class SampleSkeleton:
    instruction: str
    target: str
    history: tuple[int, ...]
    current: int
    actions: tuple[str, ...]


@dataclass(frozen=True)
class CoTSample:
    instruction: str
    history: tuple[int, ...]
    current: int
    cot: CoTBlock
    actions: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(int(h) for h in self.history))
        object.__setattr__(self, "actions", tuple(Action(str(a).upper()).value for a in self.actions))
        if len(self.actions) != HORIZON:
            raise ValueError(f"ground truth must hold exactly {HORIZON} actions")
        if any(h >= self.current for h in self.history):
            raise ValueError("history must strictly precede the current frame")

    def as_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "history": list(self.history),
            "current": self.current,
            "cot": {
                "perception": self.cot.perception,
                "target_env": self.cot.target_env,
                "env_action": self.cot.env_action,
            },
            "actions": list(self.actions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoTSample":
        return cls(d["instruction"], tuple(d["history"]), d["current"], CoTBlock(**d["cot"]), tuple(d["actions"]))


def valid_keyframes(traj: TrajectorySource) -> list[int]:
    return [i for i in range(len(traj.frames)) if i + HORIZON <= len(traj.actions)]


def sample_keyframe(traj: TrajectorySource, seed: int) -> SampleSkeleton:
    """Pick a current frame uniformly among those followed by at least five actions."""
    valid = valid_keyframes(traj)
    if not valid:
        raise ValueError("insufficient trailing actions")
    c = valid[SplitMix64(seed).randbelow(len(valid))]
    return SampleSkeleton(
        instruction=traj.instruction,
        target=traj.target,
        history=traj.frames[:c],
        current=traj.frames[c],
        actions=traj.actions[c : c + HORIZON],
    )


class AnnotationError(RuntimeError):
    pass


class Annotator(Protocol):
    def __call__(self, skeleton: SampleSkeleton) -> CoTBlock: ...


_PHRASES = {
    "MOVE_FORWARD": "move forward",
    "TURN_LEFT": "turn left",
    "TURN_RIGHT": "turn right",
    "STOP": "stop",
}


class TemplateAnnotator:
    """Fills the three sections from the target label and the ground-truth actions."""

    def __call__(self, sk: SampleSkeleton) -> CoTBlock:
        plan = ", then ".join(_PHRASES[a] for a in sk.actions)
        return CoTBlock(
            perception=(
                f"The current view (frame {sk.current}) follows {len(sk.history)} earlier frames "
                f"of the search for the {sk.target}."
            ),
            target_env=f"Objects and regions that usually surround a {sk.target} are the ones to track in this view.",
            env_action=f"To approach the {sk.target}: {plan}.",
        )


class HttpAnnotator:
    """Client for an external annotation service.

    POSTs ``{"instruction", "target", "frame_refs"}`` as JSON and expects
    ``{"perception", "target_env", "env_action"}`` back, all non-empty strings.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2, backoff: float = 0.5):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def request_body(self, sk: SampleSkeleton) -> dict:
        return {"instruction": sk.instruction, "target": sk.target, "frame_refs": list(sk.history) + [sk.current]}

    def _post(self, body: dict) -> dict:
        req = urllib.request.Request(
            self.endpoint,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    def __call__(self, sk: SampleSkeleton) -> CoTBlock:
        body = self.request_body(sk)
        last = None
        for attempt in range(self.retries + 1):
            try:
                payload = self._post(body)
                break
            except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
                last = exc
                logger.warning("annotation attempt %d failed: %s", attempt + 1, exc)
                if attempt < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        else:
            raise AnnotationError(f"annotation service failed after {self.retries + 1} attempts: {last}")
        return parse_annotation(payload)


def parse_annotation(payload) -> CoTBlock:
    if not isinstance(payload, dict):
        raise AnnotationError("malformed annotation: expected a JSON object")
    fields = {}
    for key in ("perception", "target_env", "env_action"):
        v = payload.get(key)
        if not isinstance(v, str) or not v.strip():
            raise AnnotationError(f"malformed annotation: section {key!r} missing or empty")
        fields[key] = v.strip()
    return CoTBlock(**fields)


def annotate(skeleton: SampleSkeleton, annotator: Annotator) -> CoTSample:
    cot = annotator(skeleton)
    return CoTSample(skeleton.instruction, skeleton.history, skeleton.current, cot, skeleton.actions)


def annotate_all(skeletons: Sequence[SampleSkeleton], annotator: Annotator, max_workers: int = 4):
    """Annotate concurrently; returns ``(annotated, failed)`` with input order preserved.

    ``failed`` holds ``(skeleton, reason)`` pairs for samples left unannotated.
    """

    def one(sk):
        try:
            return annotate(sk, annotator), None
        except (AnnotationError, ValueError) as exc:
            return None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = list(pool.map(one, skeletons))
    done = [s for s, _ in results if s is not None]
    failed = [(sk, err) for sk, (s, err) in zip(skeletons, results) if s is None]
    return done, failed


def hedging_pattern(terms: Iterable[str]) -> re.Pattern:
    alts = "|".join(re.escape(t) for t in sorted(set(terms), key=len, reverse=True))
    return re.compile(rf"\b(?:{alts})\b", re.IGNORECASE)


def curate(samples: Sequence[CoTSample], terms: Iterable[str] = DEFAULT_HEDGING_TERMS):
    """Drop samples whose perception section hedges; returns ``(kept, [(sample, reason)])``."""
    pattern = hedging_pattern(terms)
    kept, discarded = [], []
    for s in samples:
        m = pattern.search(s.cot.perception)
        if m:
            discarded.append((s, f"hedging term {m.group(0).lower()!r} in perception"))
        else:
            kept.append(s)
    return kept, discarded


def write_dataset(samples: Iterable[CoTSample], path) -> None:
    lines = [json.dumps(s.as_dict(), ensure_ascii=False) + "\n" for s in samples]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_dataset(path) -> list[CoTSample]:
    with open(path, encoding="utf-8") as fh:
        return [CoTSample.from_dict(json.loads(line)) for line in fh if line.strip()]


def read_trajectories(path) -> list[TrajectorySource]:
    with open(path, encoding="utf-8") as fh:
        return [TrajectorySource.from_dict(json.loads(line)) for line in fh if line.strip()]


def forge(
    trajectories: Sequence[TrajectorySource],
    seed: int,
    annotator: Optional[Annotator] = None,
    terms: Iterable[str] = DEFAULT_HEDGING_TERMS,
    max_workers: int = 4,
) -> dict:
    """Sample, annotate and curate one sample per trajectory.

    Each trajectory gets its own seed drawn from a SplitMix64 stream seeded
    with ``seed``, so results do not depend on worker scheduling.
    """
    rng = SplitMix64(seed)
    skeletons, skipped = [], []
    for i, traj in enumerate(trajectories):
        sub = rng.next_u64()
        try:
            skeletons.append(sample_keyframe(traj, sub))
        except ValueError as exc:
            skipped.append({"trajectory": i, "reason": str(exc)})
    annotated, failed = annotate_all(skeletons, annotator or TemplateAnnotator(), max_workers)
    kept, discarded = curate(annotated, terms)
    return {
        "kept": kept,
        "discarded": discarded,
        "unannotated": failed,
        "skipped": skipped,
    }
