import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from err_rewiring import kernels
from err_rewiring._backend import HAVE_NUMBA
from err_rewiring.graph import from_edge_list

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel dispatcher through one backend for the duration of a test."""
    monkeypatch.setattr(kernels, "USE_NUMBA", request.param == "numba")
    return request.param


def path_graph(n, directed=False):
    return from_edge_list([(i, i + 1) for i in range(n - 1)], n, directed)


def cycle_graph(n, directed=False):
    return from_edge_list([(i, (i + 1) % n) for i in range(n)], n, directed)


def complete_graph(n, directed=False):
    pairs = itertools.permutations(range(n), 2) if directed else itertools.combinations(range(n), 2)
    return from_edge_list(list(pairs), n, directed)


def star_graph(leaves):
    return from_edge_list([(0, k) for k in range(1, leaves + 1)], leaves + 1, False)


def random_connected(rng, n, p=0.3):
    """Random spanning tree plus Erdos-Renyi extras."""
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            pairs.add((i, j))
    return from_edge_list(sorted(pairs), n, False)


def random_digraph(rng, n, p=0.3):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p]
    return from_edge_list(pairs, n, True)


def random_strong_digraph(rng, n, p=0.2):
    """Hamiltonian cycle on a random order plus random extra arcs."""
    order = rng.permutation(n)
    pairs = {(int(order[k]), int(order[(k + 1) % n])) for k in range(n)}
    pairs |= {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p}
    return from_edge_list(sorted(pairs), n, True)


@st.composite
def connected_graphs(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.floats(0.0, 0.8))
    return random_connected(np.random.default_rng(seed), n, p)


@st.composite
def digraphs(draw, min_n=1, max_n=9):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.floats(0.0, 0.6))
    return random_digraph(np.random.default_rng(seed), n, p)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
