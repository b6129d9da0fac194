"""Parse model output (an optional three-section chain of thought, then an action plan).

Canonical grammar::

    Environment Perception: <text>
    Target-Environment Relationship: <text>
    Environment-Action Relationship: <text>
    MOVE_FORWARD
    TURN_LEFT
    STOP

Headers are matched case-insensitively and may carry numbering (``1.``,
``2)``), markdown emphasis or ``#`` prefixes, and en/em dashes. The action
plan is the last run of lines made only of action tokens; tokens on one line
may be numbered or separated by commas, arrows or punctuation. An optional
``Actions:`` header line starts the plan explicitly.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

MAX_PLAN_LENGTH = 5


class Action(str, enum.Enum):
    MOVE_FORWARD = "MOVE_FORWARD"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    STOP = "STOP"


DEFAULT_VOCABULARY: tuple[str, ...] = tuple(a.value for a in Action)


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class CoTBlock:
    perception: str = ""
    target_env: str = ""
    env_action: str = ""


@dataclass(frozen=True)
class ActionPlan:
    actions: tuple[str, ...]

    def __post_init__(self):
        acts = tuple(str(a.value if isinstance(a, Action) else a).upper() for a in self.actions)
        object.__setattr__(self, "actions", acts)
        if not 1 <= len(acts) <= MAX_PLAN_LENGTH:
            raise ValueError(f"plan must hold 1..{MAX_PLAN_LENGTH} actions, got {len(acts)}")
        if Action.STOP.value in acts[:-1]:
            raise ValueError("no action may follow STOP")


@dataclass(frozen=True)
class ParsedOutput:
    cot: Optional[CoTBlock]
    plan: ActionPlan
    truncated: bool = False


_SECTIONS = {
    "perception": r"environment\s+perception",
    "target_env": r"target\s*[-‐-―]\s*environment\s+relationships?",
    "env_action": r"environment\s*[-‐-―]\s*action\s+relationships?",
}
_HEADER = re.compile(
    r"^[\s#>*_]*(?:\d{1,3}\s*[.)]\s*)?[\s*_]*(?:(?P<perception>" + _SECTIONS["perception"] + r")"
    r"|(?P<target_env>" + _SECTIONS["target_env"] + r")"
    r"|(?P<env_action>" + _SECTIONS["env_action"] + r"))[\s*_]*:?[\s*_]*(?P<rest>.*)$",
    re.IGNORECASE,
)
_ACTIONS_HEADER = re.compile(r"^[\s#>*_]*(?:final\s+)?actions?(?:\s+plan)?[\s*_]*:[\s*_]*(?P<rest>.*)$", re.IGNORECASE)
_NUMBERING = re.compile(r"(?<![A-Za-z0-9])\d{1,3}\s*[.):]")
_SEPARATORS = re.compile(r"^[\s,;.:!|>\-=/\[\](){}\"'`*_→]*$")


def _vocab_pattern(vocabulary: Sequence[str]) -> re.Pattern:
    alts = []
    for word in sorted(vocabulary, key=len, reverse=True):
        parts = [re.escape(p) for p in re.split(r"[\s_\-]+", word.strip()) if p]
        alts.append(r"[\s_\-]*".join(parts))
    return re.compile(r"(?<![A-Za-z0-9])(" + "|".join(alts) + r")(?![A-Za-z0-9])", re.IGNORECASE)


_DEFAULT_PATTERN = _vocab_pattern(DEFAULT_VOCABULARY)


def _canonical(token: str, vocabulary: Sequence[str]) -> str:
    squashed = re.sub(r"[\s_\-]+", "", token).upper()
    for word in vocabulary:
        if re.sub(r"[\s_\-]+", "", word).upper() == squashed:
            return word.upper()
    raise ParseError(f"unknown action {token!r}")  # unreachable for tokens the pattern matched


def _line_actions(line: str, pattern: re.Pattern, vocabulary: Sequence[str]) -> list[str] | None:
    """Actions on ``line`` if it holds nothing else, otherwise ``None``."""
    found = pattern.findall(line)
    if not found:
        return None
    rest = _NUMBERING.sub(" ", pattern.sub(" ", line))
    if not _SEPARATORS.match(rest):
        return None
    return [_canonical(tok, vocabulary) for tok in found]


def parse_output(text, vocabulary: Sequence[str] = DEFAULT_VOCABULARY) -> ParsedOutput:
    """Split model output into an optional :class:`CoTBlock` and an :class:`ActionPlan`.

    Actions after the first STOP are dropped; plans longer than five are cut
    to five and flagged with ``truncated``. Raises :class:`ParseError` when no
    action can be found.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    if not isinstance(text, str):
        raise ParseError(f"expected text, got {type(text).__name__}")
    pattern = _DEFAULT_PATTERN if tuple(vocabulary) == DEFAULT_VOCABULARY else _vocab_pattern(vocabulary)
    lines = text.splitlines()

    # locate the plan: after an explicit Actions header, else the trailing run of action lines
    plan_start = None
    for i in range(len(lines) - 1, -1, -1):
        m = _ACTIONS_HEADER.match(lines[i])
        if m and not _HEADER.match(lines[i]):
            plan_start = i
            break
    actions: list[str] = []
    if plan_start is not None:
        tail = [_ACTIONS_HEADER.match(lines[plan_start]).group("rest")] + lines[plan_start + 1 :]
        for line in tail:
            acts = _line_actions(line, pattern, vocabulary)
            if acts:
                actions.extend(acts)
        cot_lines = lines[:plan_start]
    else:
        end = len(lines)
        while end > 0 and not lines[end - 1].strip():
            end -= 1
        start = end
        while start > 0:
            line = lines[start - 1]
            if not line.strip():
                start -= 1
                continue
            acts = _line_actions(line, pattern, vocabulary)
            if acts is None:
                break
            actions[:0] = acts
            start -= 1
        cot_lines = lines[:start]

    if not actions:
        raise ParseError("no actions")
    if Action.STOP.value in actions:
        actions = actions[: actions.index(Action.STOP.value) + 1]
    truncated = len(actions) > MAX_PLAN_LENGTH
    if truncated:
        logger.warning("action plan of %d actions truncated to %d", len(actions), MAX_PLAN_LENGTH)
        actions = actions[:MAX_PLAN_LENGTH]
    return ParsedOutput(cot=_parse_cot(cot_lines), plan=ActionPlan(tuple(actions)), truncated=truncated)


def _parse_cot(lines: Iterable[str]) -> Optional[CoTBlock]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines:
        m = _HEADER.match(line)
        if m:
            current = next(k for k in _SECTIONS if m.group(k))
            sections.setdefault(current, [])
            if m.group("rest").strip():
                sections[current].append(m.group("rest"))
        elif current is not None:
            sections[current].append(line)
    if not sections:
        return None
    return CoTBlock(**{k: "\n".join(v).strip() for k, v in sections.items()})


def render_plan(plan: ActionPlan) -> str:
    return "\n".join(plan.actions)


def render_output(cot: Optional[CoTBlock], plan: ActionPlan) -> str:
    """Canonical text form; :func:`parse_output` inverts it."""
    parts = []
    if cot is not None:
        parts += [
            f"Environment Perception: {cot.perception}",
            f"Target-Environment Relationship: {cot.target_env}",
            f"Environment-Action Relationship: {cot.env_action}",
            "Actions:",
        ]
    parts.append(render_plan(plan))
    return "\n".join(parts)
