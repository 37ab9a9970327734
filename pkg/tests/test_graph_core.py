import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascadia.errors import MalformedGraph
from cascadia.graph_core import (build_graph, connected_components, flip_edges, graph_from_json,
                                 incidence_matrix, is_connected, load_graph, max_first_order,
                                 orientation_flips, relabel_first, save_graph)
from cascadia.scenarios import random_connected_graph

from helpers import brute_force_partition


def test_incidence_signs_and_shape(six):
    c = incidence_matrix(six)
    assert c.shape == (11, 6)
    # edge 1 runs 2 -> 1: head 1 gets +1, tail 2 gets -1
    assert c[0, 0] == 1 and c[0, 1] == -1
    assert np.all(c.sum(axis=1) == 0)
    assert np.all(np.abs(c).sum(axis=1) == 2)


def test_incidence_zero_rows_for_removed(six):
    c = incidence_matrix(six, [1, 2, 3])
    assert np.all(c[3:] == 0) and np.all(np.abs(c[:3]).sum(axis=1) == 2)


def test_laplacian_of_two_node_graph(two):
    c = incidence_matrix(two)
    assert np.array_equal(c.T @ c, [[1, -1], [-1, 1]])


@pytest.mark.parametrize("edges, msg", [
    ([(1, 1)], "self-loop"),
    ([(1, 2), (2, 1)], "duplicates edge 1"),
    ([(1, 4)], "outside"),
    ([], "empty"),
    ([(1,)], r"not a \(tail, head\) pair"),
])
def test_build_graph_rejects(edges, msg):
    with pytest.raises(MalformedGraph, match=msg):
        build_graph(3, edges)


def test_json_roundtrip(tmp_path, six):
    p = tmp_path / "g.json"
    save_graph(six, p)
    assert load_graph(p) == six
    with pytest.raises(MalformedGraph):
        graph_from_json({"nodes": 2, "edges": [[1, 2]], "extra": 1})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(MalformedGraph):
        load_graph(tmp_path / "bad.json")
    assert json.loads(p.read_text()) == {"nodes": 6, "edges": [list(e) for e in six.edges]}


def test_components_after_failures(six):
    # removing 1, 5, 6, 7 and 8 cuts node 2 and node 6 off individually
    parts = connected_components(six, [2, 3, 4, 9, 10, 11])
    assert parts.component_count == 3
    assert parts.as_sets() == {frozenset({1, 3, 4, 5}), frozenset({2}), frozenset({6})}
    assert parts.component_of(1) == 1  # ids follow the smallest node
    assert is_connected(six) and not is_connected(six, [2, 3, 4, 9, 10, 11])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 7))
def test_components_match_bfs(seed, n):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n)
    alive = [e for e in g.edge_ids() if rng.random() < 0.5]
    assert connected_components(g, alive).as_sets() == brute_force_partition(g, alive)


def test_relabel_first_moves_node_and_keeps_edge_ids(six):
    g, perm = relabel_first(six, 3)
    assert perm == {1: 2, 2: 3, 3: 1, 4: 4, 5: 5, 6: 6}
    assert g.m == six.m
    assert g.edges[1] == (1, 2)  # old edge 2 = (3, 1)
    assert list(max_first_order(6, 3)) == [2, 0, 1, 3, 4, 5]
    same, ident = relabel_first(six, 1)
    assert same == six and all(k == v for k, v in ident.items())


def test_orientation_flips_uses_secondary_on_zero():
    assert orientation_flips([1.0, -2.0, 0.0, 0.0], [5.0, 5.0, -1.0, 1.0]) == [2, 3]
    assert orientation_flips([1e-15, 1.0], [-1.0, 1.0]) == [1]


def test_flip_edges_negates_incidence_rows(six):
    f = flip_edges(six, [2, 5])
    c0, c1 = incidence_matrix(six), incidence_matrix(f)
    assert np.array_equal(c1[[1, 4]], -c0[[1, 4]])
    assert np.array_equal(np.delete(c1, [1, 4], 0), np.delete(c0, [1, 4], 0))
