import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pqsched.plan import Pipeline
from pqsched.vectors import make_clone

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def rand_clones(rng: random.Random, n: int, d: int = 3, s: int = 1, lam: float = 1.0,
                eps: float = 0.5, prefix: str = "c", zero_p: float = 0.1):
    out = []
    for i in range(n):
        work = [0.0 if rng.random() < zero_p else rng.uniform(0, 100) for _ in range(d)]
        demand = [rng.uniform(0, lam) for _ in range(s)]
        out.append(make_clone(prefix, i, work, demand, eps))
    return out


def rand_pipes(rng: random.Random, n_pipes: int, max_clones: int = 6, d: int = 3, s: int = 1,
               lam: float = 0.3, eps: float = 0.5):
    return [Pipeline(f"p{k}", tuple(rand_clones(rng, rng.randint(1, max_clones), d, s, lam,
                                                eps, prefix=f"p{k}.op")), (f"p{k}.op",))
            for k in range(n_pipes)]


@pytest.fixture
def rng():
    return random.Random(12345)


def vectors(d, lo=0.0, hi=100.0):
    return st.lists(st.floats(lo, hi, allow_nan=False), min_size=d, max_size=d)


@st.composite
def clone_sets(draw, max_n=8, d=None, s=1, lam=1.0):
    d = d or draw(st.integers(1, 4))
    eps = draw(st.floats(0, 1))
    n = draw(st.integers(1, max_n))
    return [make_clone("h", i, draw(vectors(d)), draw(vectors(s, 0.0, lam)), eps)
            for i in range(n)]


ACCEPTANCE_LINES: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
