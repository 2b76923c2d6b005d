import numpy as np
import pytest

from conftest import build, gaussian
from windowgraph.invariants import check_all, check_graph, check_top, check_tree


@pytest.fixture
def index():
    return build(gaussian(300, 4, seed=51), np.random.default_rng(52).permutation(300), m=8, omega_c=16)


def _names(problems):
    return {p.name for p in problems}


def test_clean_index_passes(index):
    assert check_all(index) == []


def _first_nonempty(index, layer=0):
    return int(np.flatnonzero(index._deg[layer, : index.n] > 1)[0])


def test_degree_cap(index):
    index._deg[0, 0] = index.params.m + 1
    assert _names(check_graph(index)) == {"degree-cap invariant"}


def test_invalid_id(index):
    v = _first_nonempty(index)
    index._nbrs[0, v, 0] = index.n + 5
    assert "valid-id invariant" in _names(check_graph(index))


def test_self_loop(index):
    v = _first_nonempty(index)
    index._nbrs[0, v, 0] = v
    assert "no-self-loop invariant" in _names(check_graph(index))


def test_duplicate(index):
    v = _first_nonempty(index)
    index._nbrs[0, v, 1] = index._nbrs[0, v, 0]
    assert _names(check_graph(index)) == {"no-duplicate invariant"}


def test_tree_content(index):
    index.tree.insert(10**9)
    assert "tree-content invariant" in _names(check_tree(index))


def test_top_layer(index):
    index.top -= 1
    assert _names(check_top(index)) == {"top-layer invariant"}
