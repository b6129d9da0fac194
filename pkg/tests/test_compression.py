import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from samem import oracles
from samem.compression import CompressionStrategy, CompressionVariant, compress_frame, compress_indices, score_tokens

from conftest import matrices

BOTH = CompressionStrategy(CompressionVariant.INSTRUCTION_PLUS_CURRENT, 30)
INST = CompressionStrategy(CompressionVariant.INSTRUCTION_ONLY, 30)
PREV = [[1, 0], [0, 1], [0.7071, 0.7071]]


def test_default_budget_is_thirty():
    assert CompressionStrategy().budget_k == 30
    assert CompressionStrategy().variant is CompressionVariant.INSTRUCTION_PLUS_CURRENT


def test_scores_hand_evaluated():
    expected = oracles.token_scores(PREV, [[1, 0]], [[1, 0]])
    np.testing.assert_allclose(expected, [1.0, 0.0, 0.70710678], atol=1e-8)
    np.testing.assert_allclose(score_tokens(PREV, [[1, 0]], [[1, 0]], BOTH), expected, atol=1e-12)


def test_instruction_only_collapses_when_means_agree():
    np.testing.assert_allclose(score_tokens(PREV, [[1, 0]], [[1, 0]], INST), score_tokens(PREV, [[1, 0]], [[1, 0]], BOTH))


def test_instruction_only_ignores_current():
    a = score_tokens(PREV, [[1, 0]], [[0, 1]], INST)
    b = score_tokens(PREV, [[1, 0]], [[-3, 7]], INST)
    np.testing.assert_array_equal(a, b)


def test_orthogonal_token_scores_zero():
    assert score_tokens([[0, 0, 1]], [[1, 0, 0]], [[0, 1, 0]])[0] == 0.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        score_tokens([[1, 0]], [[1, 0, 0]], [[1, 0]])


def test_compress_keeps_order():
    out = compress_frame(PREV, [[1, 0]], [[1, 0]], CompressionStrategy(budget_k=2))
    np.testing.assert_array_equal(out, [[1, 0], [0.7071, 0.7071]])


def test_at_budget_passes_through():
    rng = np.random.default_rng(0)
    prev = rng.normal(size=(30, 8))
    out = compress_frame(prev, rng.normal(size=(3, 8)), rng.normal(size=(30, 8)), BOTH)
    np.testing.assert_array_equal(out, prev)


def test_equal_scores_take_first_tokens():
    prev = np.tile([1.0, 2.0], (4, 1))
    assert compress_indices(prev, [[1, 0]], [[0, 1]], CompressionStrategy(budget_k=2)) == [0, 1]


@given(matrices(max_tokens=12, dim=3), matrices(max_tokens=3, dim=3), matrices(max_tokens=5, dim=3),
       st.integers(1, 12), st.booleans())
def test_selection_and_copy_invariants(prev, instr, cur, k, inst_only):
    strat = CompressionStrategy(CompressionVariant.INSTRUCTION_ONLY if inst_only else CompressionVariant.INSTRUCTION_PLUS_CURRENT, k)
    out = compress_frame(prev, instr, cur, strat)
    assert out.shape[0] == min(prev.shape[0], k)
    idx = compress_indices(prev, instr, cur, strat)
    assert all(a < b for a, b in zip(idx, idx[1:]))
    if prev.shape[0] > k:
        np.testing.assert_array_equal(out, prev[idx])
    scores = oracles.token_scores(prev, instr, cur, inst_only)
    assert oracles.selection_agrees(scores, idx, k)
    assert oracles.selection_agrees(scores, oracles.top_k_by_enumeration(scores, k), k)


def test_monotone_under_score_increase():
    rng = random.Random(7)
    for _ in range(200):
        d = 4
        prev = np.array([[rng.gauss(0, 1) for _ in range(d)] for _ in range(10)])
        instr = np.array([[rng.gauss(0, 1) for _ in range(d)]])
        cur = np.array([[rng.gauss(0, 1) for _ in range(d)] for _ in range(3)])
        strat = CompressionStrategy(budget_k=4)
        chosen = compress_indices(prev, instr, cur, strat)
        j = chosen[rng.randrange(len(chosen))]
        # the token aligned with both means scores strictly higher than anything else can
        target = instr.mean(0) / np.linalg.norm(instr.mean(0)) + cur.mean(0) / np.linalg.norm(cur.mean(0))
        bumped = prev.copy()
        bumped[j] = target
        scores = score_tokens(bumped, instr, cur, strat)
        assert scores[j] >= score_tokens(prev, instr, cur, strat)[j]
        assert j in compress_indices(bumped, instr, cur, strat)


def test_brute_force_subset_equivalence_small_frames():
    rng = random.Random(11)
    for _ in range(300):
        n, d = rng.randint(1, 12), rng.randint(1, 5)
        prev = [[rng.gauss(0, 1) for _ in range(d)] for _ in range(n)]
        if n > 2 and rng.random() < 0.3:
            prev[1] = list(prev[0])  # exact duplicate exercises tie-breaking
        instr = [[rng.gauss(0, 1) for _ in range(d)] for _ in range(2)]
        cur = [[rng.gauss(0, 1) for _ in range(d)] for _ in range(3)]
        k = rng.randint(1, 12)
        for inst_only in (False, True):
            strat = CompressionStrategy(CompressionVariant.INSTRUCTION_ONLY if inst_only else CompressionVariant.INSTRUCTION_PLUS_CURRENT, k)
            scores = oracles.token_scores(prev, instr, cur, inst_only)
            expected = oracles.top_k_by_enumeration(scores, k)
            assert oracles.selection_agrees(scores, compress_indices(prev, instr, cur, strat), k)
            assert oracles.selection_agrees(scores, expected, k)
