"""Planar action kinematics, episode success judgment, and SR/SPL.

Heading 0 points along +x and increases counter-clockwise, so TURN_LEFT adds
the turn angle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from samem.action_parse import Action


@dataclass(frozen=True)
class ActionKinematics:
    step_size: float = 0.25  # m
    turn_angle: float = 30.0  # deg
    success_distance: float = 1.0  # m
    require_stop: bool = True

    def __post_init__(self):
        for name in ("step_size", "turn_angle", "success_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class AgentPose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_heading(self.heading))


def normalize_heading(deg: float) -> float:
    h = math.fmod(deg, 360.0)
    if h < 0:
        h += 360.0
    return 0.0 if h == 360.0 else h


def apply_action(pose: AgentPose, action, kin: ActionKinematics = ActionKinematics()) -> AgentPose:
    action = Action(getattr(action, "value", action))
    if action is Action.MOVE_FORWARD:
        rad = math.radians(pose.heading)
        return AgentPose(pose.x + kin.step_size * math.cos(rad), pose.y + kin.step_size * math.sin(rad), pose.heading)
    if action is Action.TURN_LEFT:
        return AgentPose(pose.x, pose.y, pose.heading + kin.turn_angle)
    if action is Action.TURN_RIGHT:
        return AgentPose(pose.x, pose.y, pose.heading - kin.turn_angle)
    return pose


@dataclass(frozen=True)
class EpisodeRecord:
    actions: tuple[str, ...]
    start: AgentPose
    targets: tuple[tuple[float, float], ...]
    geodesic: float

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(Action(str(getattr(a, "value", a)).upper()).value for a in self.actions))
        object.__setattr__(self, "targets", tuple((float(x), float(y)) for x, y in self.targets))
        if not self.targets:
            raise ValueError("an episode needs at least one target")
        if not self.geodesic > 0:
            raise ValueError("geodesic shortest-path length must be positive")

    def as_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "start": {"x": self.start.x, "y": self.start.y, "heading": self.start.heading},
            "targets": [list(t) for t in self.targets],
            "geodesic": self.geodesic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        start = d["start"]
        pose = AgentPose(**start) if isinstance(start, dict) else AgentPose(*start)
        return cls(tuple(d["actions"]), pose, tuple(tuple(t) for t in d["targets"]), float(d["geodesic"]))


@dataclass(frozen=True)
class JudgedEpisode:
    success: bool
    path_length: float
    geodesic: float
    final_pose: AgentPose
    stopped: bool


def judge_episode(rec: EpisodeRecord, kin: ActionKinematics = ActionKinematics()) -> JudgedEpisode:
    """Roll the actions out from the start pose; the episode ends at the first STOP."""
    pose = rec.start
    forward = 0
    stopped = False
    for a in rec.actions:
        if a == Action.STOP.value:
            stopped = True
            break
        if a == Action.MOVE_FORWARD.value:
            forward += 1
        pose = apply_action(pose, a, kin)
    nearest = min(math.hypot(pose.x - tx, pose.y - ty) for tx, ty in rec.targets)
    success = nearest <= kin.success_distance and (stopped or not kin.require_stop)
    return JudgedEpisode(success, kin.step_size * forward, rec.geodesic, pose, stopped)


def compute_sr_spl(judged: Sequence[JudgedEpisode]) -> tuple[float, float]:
    """Success rate and success weighted by (normalized inverse) path length."""
    if not judged:
        raise ValueError("no episodes to score")
    sr = sum(1.0 for j in judged if j.success) / len(judged)
    spl = 0.0
    for j in judged:
        if j.success:
            spl += j.geodesic / max(j.path_length, j.geodesic)
    return sr, spl / len(judged)


def read_records(path) -> list[EpisodeRecord]:
    with open(path, encoding="utf-8") as fh:
        return [EpisodeRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_records(records: Iterable[EpisodeRecord], path) -> None:
    Path(path).write_text("".join(json.dumps(r.as_dict()) + "\n" for r in records), encoding="utf-8")
