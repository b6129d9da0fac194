"""Brute-force reference implementations in plain Python.

Nothing here touches numpy or the vectorised code paths, so the two can be
cross-checked against each other.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

Vector = Sequence[float]
Matrix = Sequence[Vector]

DEFAULT_TOL = 1e-9


class OracleDivergence(AssertionError):
    def __init__(self, step, operation, expected, actual):
        self.step, self.operation, self.expected, self.actual = step, operation, expected, actual
        super().__init__(f"step {step}: {operation} diverged from oracle: expected {expected}, got {actual}")


def _rows(m) -> list[list[float]]:
    return [[float(x) for x in row] for row in m]


def dot(a: Vector, b: Vector) -> float:
    return math.fsum(x * y for x, y in zip(a, b))


def cos(a: Vector, b: Vector) -> float:
    na = math.sqrt(dot(a, a))
    nb = math.sqrt(dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot(a, b) / (na * nb)))


def mean(m: Matrix) -> list[float]:
    rows = _rows(m)
    return [math.fsum(col) / len(rows) for col in zip(*rows)]


def token_scores(prev: Matrix, instruction: Matrix, current: Matrix, instruction_only: bool = False) -> list[float]:
    t_bar, c_bar = mean(instruction), mean(current)
    out = []
    for p in _rows(prev):
        s_inst = cos(t_bar, p)
        out.append(s_inst if instruction_only else (s_inst + cos(c_bar, p)) / 2)
    return out


def top_k_by_sort(scores: Sequence[float], k: int) -> list[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(order[:k])


def top_k_by_enumeration(scores: Sequence[float], k: int) -> list[int]:
    """Best ``k``-subset by exhaustive search; lexicographically first subset wins ties."""
    n = len(scores)
    if k >= n:
        return list(range(n))
    best, best_key = None, None
    for combo in itertools.combinations(range(n), k):
        key = sorted((scores[i] for i in combo), reverse=True)
        if best_key is None or key > best_key:
            best, best_key = list(combo), key
    return best


def fusion_pair_scores(frames: Sequence[Matrix], instruction: Matrix | None, current: Matrix,
                       w_txt: float = 0.3, w_adj: float = 0.4, w_cur: float = 0.3) -> list[float]:
    """Weighted fusion probability of each adjacent pair, term by term."""
    means = [mean(f) for f in frames]
    t_bar = None if instruction is None else mean(instruction)
    c_bar = mean(current)
    scores = []
    for a, b in zip(means, means[1:]):
        p_adja = cos(a, b)
        p_cur = 1 - (cos(a, c_bar) + cos(b, c_bar)) / 2
        p = w_adj * p_adja + w_cur * p_cur
        if t_bar is not None:
            p_inst = 1 - (cos(a, t_bar) + cos(b, t_bar)) / 2
            p += w_txt * p_inst
        scores.append(p)
    return scores


def argmax_first(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def argmin_first(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def temporal_removal_index(source_indices: Sequence[Sequence[int]]) -> int:
    """Scan for the tightest gap between consecutive frames and return the later frame."""
    gaps = [source_indices[i + 1][0] - source_indices[i][-1] for i in range(len(source_indices) - 1)]
    return argmin_first(gaps) + 1


def argmax_agrees(scores: Sequence[float], idx: int, tol: float = DEFAULT_TOL) -> bool:
    """True if ``idx`` is the oracle argmax, or a near-tie within ``tol`` of it."""
    best = argmax_first(scores)
    if idx == best:
        return True
    near = [i for i, s in enumerate(scores) if s >= scores[best] - tol]
    return len(near) > 1 and idx in near


def selection_agrees(scores: Sequence[float], selected: Sequence[int], k: int, tol: float = DEFAULT_TOL) -> bool:
    """True if ``selected`` is the oracle top-k, or differs only among scores within ``tol`` of the cut."""
    expected = top_k_by_sort(scores, k)
    if list(selected) == expected:
        return True
    if len(selected) != len(expected) or len(set(selected)) != len(selected):
        return False
    chosen = set(selected)
    lo = min(scores[i] for i in chosen)
    hi = max((scores[i] for i in range(len(scores)) if i not in chosen), default=-math.inf)
    return hi <= lo + tol


class OracleAuditor:
    """Step audit hook that re-derives every decision by brute force and raises on divergence."""

    def __init__(self, tol: float = DEFAULT_TOL):
        self.tol = tol
        self.checks = 0

    def __call__(self, operation: str, payload: dict) -> None:
        self.checks += 1
        if operation == "compress_frame":
            self._check_compress(payload)
        elif operation == "select_maintenance_target":
            self._check_maintenance(payload)

    def _check_compress(self, p: dict) -> None:
        strategy = p["strategy"]
        scores = token_scores(p["prev"], p["instruction"], p["current"], strategy.variant.value == "inst-only")
        if not selection_agrees(scores, p["selected"], strategy.budget_k, self.tol):
            raise OracleDivergence(p["step"], "compress_frame", top_k_by_sort(scores, strategy.budget_k), list(p["selected"]))

    def _check_maintenance(self, p: dict) -> None:
        mem, policy, action = p["mem"], p["policy"], p["action"]
        op, crit = policy.operation.value, policy.criterion.value
        if crit == "temporal":
            j = temporal_removal_index(mem.source_indices)
            expected = j if op == "remove" else j - 1
            if action.index != expected:
                raise OracleDivergence(p["step"], f"{op}+{crit}", [expected], [action.index])
        elif op == "fuse":
            w = policy.weights
            scores = fusion_pair_scores(mem.frames, p["instruction"], p["current"], w.w_txt, w.w_adj, w.w_cur)
            if not argmax_agrees(scores, action.index, self.tol):
                raise OracleDivergence(p["step"], "find_merge_pair", [argmax_first(scores)], [action.index])
        else:
            t_bar, c_bar = mean(p["instruction"]), mean(p["current"])
            scores = []
            for f in mem.frames:
                m = mean(f)
                scores.append(0.5 * (1 - cos(m, t_bar)) + 0.5 * (1 - cos(m, c_bar)))
            if not argmax_agrees(scores, action.index, self.tol):
                raise OracleDivergence(p["step"], f"{op}+{crit}", [argmax_first(scores)], [action.index])
