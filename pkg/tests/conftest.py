import numpy as np
import pytest

from bufferless.netgen import GenParams, Graph, price_generate


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def random_connected_graph(n, p, rng):
    """G(n, p) conditioned on connectivity, by rejection."""
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        g = Graph.from_edges(n, edges)
        if g.is_connected():
            return g


@pytest.fixture(scope="session")
def ba1000():
    """A Price graph with the reference setting N=1000, <k>=4, gamma=3."""
    return price_generate(GenParams(N=1000, m=2, P=0.5, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_acceptance_lines = []


def record_acceptance(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    _acceptance_lines.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
