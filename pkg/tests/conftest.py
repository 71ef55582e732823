from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from qitecut.graphio import Graph, erdos_renyi

DATA = Path(__file__).parent / "data"
CONNECTED8 = DATA / "connected8.g6"


def cycle(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_graphs(count: int, n_range, seed: int, p_range=(0.09, 0.99)):
    """Random graphs with at least one edge."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        g = erdos_renyi(n, float(rng.uniform(*p_range)), int(rng.integers(2**31)))
        if g.m:
            out.append(g)
    return out


@st.composite
def graphs(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [p for p, k in zip(pairs, keep) if k])


@st.composite
def graph_and_angles(draw, min_n=2, max_n=8):
    g = draw(graphs(min_n, max_n))
    angle = st.floats(-np.pi, np.pi, allow_nan=False)
    phi = draw(st.lists(angle, min_size=g.n, max_size=g.n))
    return g, np.array(phi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
