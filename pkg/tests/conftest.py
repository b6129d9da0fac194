import os
import random

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=64)


def matrices(max_tokens=8, dim=None, max_dim=6):
    """Token matrices of shape (n, D)."""
    dims = st.just(dim) if dim is not None else st.integers(1, max_dim)
    return dims.flatmap(lambda d: st.integers(1, max_tokens).flatmap(lambda n: arrays(np.float64, (n, d), elements=finite)))


def random_memory_frames(rng: random.Random, n_frames, dim, max_tokens=8):
    return [[[rng.gauss(0, 1) for _ in range(dim)] for _ in range(rng.randint(1, max_tokens))] for _ in range(n_frames)]


@pytest.fixture
def fixtures_dir():
    return FIXTURES


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
