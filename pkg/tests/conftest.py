from __future__ import annotations

import itertools

import pytest
from hypothesis import strategies as st

from ampcg import ChainGraph, is_chain_graph


@pytest.fixture
def six_node_graph() -> ChainGraph:
    """Two singleton components feeding two undirected pairs; the running example."""
    return ChainGraph(
        6,
        directed={(0, 1), (0, 2), (0, 3), (1, 3), (2, 4), (3, 5)},
        undirected={(2, 3), (4, 5)},
    )


@st.composite
def chain_graphs(draw, min_p: int = 1, max_p: int = 5):
    """Arbitrary valid chain graphs with shrink-friendly structure."""
    p = draw(st.integers(min_p, max_p))
    pairs = list(itertools.combinations(range(p), 2))
    states = draw(st.lists(st.integers(0, 3), min_size=len(pairs), max_size=len(pairs)))
    directed = set()
    undirected = set()
    for (a, b), state in zip(pairs, states):
        if state == 1:
            directed.add((a, b))
        elif state == 2:
            directed.add((b, a))
        elif state == 3:
            undirected.add((a, b))
    g = ChainGraph(p, frozenset(directed), frozenset(undirected))
    from hypothesis import assume

    assume(is_chain_graph(g))
    return g
