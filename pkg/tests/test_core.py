import random
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samem.core import SaMemConfig, empty_memory, run, step
from samem.maintenance import MemoryState


def frames(seed, n, tokens=40, dim=6):
    rng = np.random.default_rng(seed)
    return [rng.normal(size=(tokens, dim)) for _ in range(n)], rng.normal(size=(3, dim))


def test_budget_must_agree():
    from samem.compression import CompressionStrategy
    from samem.maintenance import MaintenancePolicy
    with pytest.raises(ValueError):
        SaMemConfig(m_max=3, compression=CompressionStrategy(budget_k=4), policy=MaintenancePolicy(budget_k=5))


def test_step_on_empty_memory():
    cfg = SaMemConfig.build(m_max=3, budget_k=4)
    fs, instr = frames(0, 1)
    mem, rep = step(empty_memory(cfg), fs[0], instr, cfg)
    assert len(mem) == 1
    assert not rep.compression_applied and rep.maintenance_action is None
    np.testing.assert_array_equal(mem.frames[0], fs[0])
    assert mem.source_indices == ((0,),)


@pytest.mark.parametrize("m_max", [1, 2, 5])
@pytest.mark.parametrize("op, crit", [("fuse", "relevance"), ("remove", "temporal"), ("remove", "relevance"), ("fuse", "temporal")])
def test_frame_count_law(m_max, op, crit):
    cfg = SaMemConfig.build(m_max=m_max, budget_k=4, operation=op, criterion=crit)
    fs, instr = frames(1, 12)
    mem = empty_memory(cfg)
    for t, f in enumerate(fs, 1):
        mem, rep = step(mem, f, instr, cfg)
        assert rep.frames_after == len(mem) == min(t, m_max + 1)
        assert all(n <= 4 for n in rep.tokens_per_frame[:-1])
        np.testing.assert_array_equal(mem.frames[-1], f)
        assert rep.sequence_manifest[-2] == ("current", 40)
        assert rep.sequence_manifest[-1] == ("instruction", 3)
        assert rep.step_index == t - 1


def test_maintenance_happens_once_per_step():
    cfg = SaMemConfig.build(m_max=2, budget_k=4)
    fs, instr = frames(2, 6)
    _, reports = run(fs, instr, cfg)
    assert [r.maintenance_action is not None for r in reports] == [False, False, False, True, True, True]


def test_unbounded_memory_without_compression_is_raw_history():
    fs, instr = frames(3, 7, tokens=5)
    cfg = SaMemConfig.build(m_max=100, budget_k=5)
    mem, reports = run(fs, instr, cfg)
    assert len(mem) == 7
    for a, b in zip(mem.frames, fs):
        np.testing.assert_array_equal(a, b)
    assert not any(r.compression_applied for r in reports)


def test_determinism():
    fs, instr = frames(4, 10)
    cfg = SaMemConfig.build(m_max=3, budget_k=7)
    m1, r1 = run(fs, instr, cfg)
    m2, r2 = run(fs, instr, cfg)
    assert [r.as_dict() for r in r1] == [r.as_dict() for r in r2]
    for a, b in zip(m1.frames, m2.frames):
        assert a.tobytes() == b.tobytes()


def test_dimension_mismatch():
    cfg = SaMemConfig.build(m_max=3, budget_k=4)
    fs, instr = frames(5, 1)
    mem, _ = step(empty_memory(cfg), fs[0], instr, cfg)
    with pytest.raises(ValueError, match="dimension"):
        step(mem, np.ones((3, 7)), np.ones((1, 7)), cfg)
    with pytest.raises(ValueError, match="dimension"):
        step(mem, fs[0], np.ones((1, 2)), cfg)


def test_m_max_may_not_shrink_on_live_memory():
    fs, instr = frames(6, 2)
    mem, _ = run(fs, instr, SaMemConfig.build(m_max=5, budget_k=4))
    with pytest.raises(ValueError):
        step(mem, fs[0], instr, SaMemConfig.build(m_max=4, budget_k=4))


def test_caller_array_not_aliased():
    cfg = SaMemConfig.build(m_max=3, budget_k=4)
    f = np.ones((2, 3))
    mem, _ = step(empty_memory(cfg), f, np.ones((1, 3)), cfg)
    f[0, 0] = 9.0
    assert mem.frames[0][0, 0] == 1.0


def test_independent_episodes_in_threads():
    cfg = SaMemConfig.build(m_max=3, budget_k=6)
    jobs = [frames(s, 15) for s in range(6)]
    expected = [run(fs, instr, cfg)[0] for fs, instr in jobs]
    results = [None] * len(jobs)

    def work(i):
        results[i] = run(*jobs[i], cfg)[0]

    threads = [threading.Thread(target=work, args=(i,)) for i in range(len(jobs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for a, b in zip(expected, results):
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.frames, b.frames))


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(1, 20), st.sampled_from(["fuse", "remove"]),
       st.sampled_from(["temporal", "relevance"]), st.integers(0, 2**32))
def test_steady_state_bound(m_max, k, n, op, crit, seed):
    rng = random.Random(seed)
    d = 3
    instr = [[rng.gauss(0, 1) for _ in range(d)]]
    cfg = SaMemConfig.build(m_max=m_max, budget_k=k, operation=op, criterion=crit)
    mem = empty_memory(cfg)
    for t in range(1, n + 1):
        f = [[rng.gauss(0, 1) for _ in range(d)] for _ in range(rng.randint(1, 15))]
        mem, _ = step(mem, f, instr, cfg)
        assert len(mem) == min(t, m_max + 1)
        flat = [i for s in mem.source_indices for i in s]
        assert flat == sorted(set(flat))
