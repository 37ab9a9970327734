"""Graph representation, incidence matrix, connectivity and edge orientation.

Nodes and edges are 1-indexed. An edge's id is its 1-based position in the
edge list and doubles as its tie-break label.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedGraph


@dataclass(frozen=True)
class Graph:
    node_count: int
    edges: tuple  # ((tail, head), ...)

    @property
    def n(self):
        return self.node_count

    @property
    def m(self):
        return len(self.edges)

    def edge_ids(self):
        return range(1, self.m + 1)

    def tails(self):
        return np.array([t for t, _ in self.edges], dtype=np.intp)

    def heads(self):
        return np.array([h for _, h in self.edges], dtype=np.intp)

    def to_json(self):
        return {"nodes": self.node_count, "edges": [list(e) for e in self.edges]}


@dataclass(frozen=True)
class ComponentPartition:
    assignment: dict  # node -> component id, ids contiguous from 1
    component_count: int

    def members(self, cid):
        return [v for v, c in sorted(self.assignment.items()) if c == cid]

    def component_of(self, node):
        return self.assignment[node]

    def labels(self, n):
        """Component ids as a length-n array (node 1 at position 0)."""
        return np.array([self.assignment[v] for v in range(1, n + 1)], dtype=np.intp)

    def as_sets(self):
        """Order-free representation, handy for comparing partitions."""
        groups = {}
        for v, c in self.assignment.items():
            groups.setdefault(c, set()).add(v)
        return frozenset(frozenset(s) for s in groups.values())


def build_graph(node_count, edge_list):
    """Validate and freeze a simple graph."""
    if not isinstance(node_count, (int, np.integer)) or node_count < 1:
        raise MalformedGraph(f"node count must be a positive integer, got {node_count!r}")
    edge_list = list(edge_list)
    if not edge_list:
        raise MalformedGraph("edge list is empty")
    seen = {}
    edges = []
    for pos, e in enumerate(edge_list, start=1):
        try:
            t, h = (int(x) for x in e)
        except (TypeError, ValueError):
            raise MalformedGraph(f"edge {pos} is not a (tail, head) pair: {e!r}") from None
        if not (1 <= t <= node_count and 1 <= h <= node_count):
            raise MalformedGraph(f"edge {pos} {(t, h)} has a node outside [1, {node_count}]")
        if t == h:
            raise MalformedGraph(f"edge {pos} {(t, h)} is a self-loop")
        key = (min(t, h), max(t, h))
        if key in seen:
            raise MalformedGraph(f"edge {pos} {(t, h)} duplicates edge {seen[key]}")
        seen[key] = pos
        edges.append((t, h))
    return Graph(int(node_count), tuple(edges))


def load_graph(path):
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedGraph(f"{path}: not valid JSON ({exc})") from None
    return graph_from_json(raw)


def graph_from_json(raw):
    if not isinstance(raw, dict) or set(raw) != {"nodes", "edges"}:
        raise MalformedGraph('graph JSON must be an object with exactly "nodes" and "edges"')
    return build_graph(raw["nodes"], raw["edges"])


def save_graph(g, path):
    Path(path).write_text(json.dumps(g.to_json()) + "\n")


def incidence_matrix(g, surviving_edges=None):
    """m x n matrix with +1 at the head and -1 at the tail of each edge.

    Rows of edges not in ``surviving_edges`` are left at zero.
    """
    c = np.zeros((g.m, g.n))
    alive = g.edge_ids() if surviving_edges is None else surviving_edges
    for e in alive:
        t, h = g.edges[e - 1]
        c[e - 1, h - 1] = 1.0
        c[e - 1, t - 1] = -1.0
    return c


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def connected_components(g, surviving_edges=None):
    """Undirected components over the surviving edges (union-find).

    Component ids are numbered in order of each component's smallest node.
    """
    parent = list(range(g.n + 1))
    alive = g.edge_ids() if surviving_edges is None else surviving_edges
    for e in alive:
        t, h = g.edges[e - 1]
        rt, rh = _find(parent, t), _find(parent, h)
        if rt != rh:
            parent[max(rt, rh)] = min(rt, rh)
    ids = {}
    assignment = {}
    for v in range(1, g.n + 1):
        root = _find(parent, v)
        if root not in ids:
            ids[root] = len(ids) + 1
        assignment[v] = ids[root]
    return ComponentPartition(assignment, len(ids))


def is_connected(g, surviving_edges=None):
    return connected_components(g, surviving_edges).component_count == 1


def flip_edges(g, flipped):
    flipped = set(flipped)
    edges = tuple((h, t) if e in flipped else (t, h) for e, (t, h) in enumerate(g.edges, start=1))
    return Graph(g.node_count, edges)


def orientation_flips(primary, secondary=None, zero_tol=1e-12):
    """Edge ids to flip so that every edge carries a nonnegative flow.

    An edge is flipped when its primary value is negative, or when the
    primary value is zero (within ``zero_tol``) and the secondary is negative.
    """
    primary = np.asarray(primary, dtype=float)
    scale = max(1.0, float(np.max(np.abs(primary)))) if primary.size else 1.0
    flips = []
    for k, p in enumerate(primary):
        if abs(p) <= zero_tol * scale:
            if secondary is not None and secondary[k] < 0:
                flips.append(k + 1)
        elif p < 0:
            flips.append(k + 1)
    return flips


def orient_for_demand(g, primary, secondary=None, zero_tol=1e-12):
    """Return ``g`` with edges reoriented per :func:`orientation_flips`.

    ``primary``/``secondary`` are per-edge flow values (or signs) computed on
    ``g`` itself, typically (V e1, V d) for a big-jump demand or (V d, None)
    for a raw demand vector.
    """
    return flip_edges(g, orientation_flips(primary, secondary, zero_tol))


def relabel_first(g, i):
    """Move node ``i`` to label 1 and shift nodes 1..i-1 up by one.

    Mirrors the max-first demand reordering; edge ids are unchanged.
    Returns the relabeled graph and the old->new node map (1-indexed).
    """
    perm = {}
    for v in range(1, g.n + 1):
        if v == i:
            perm[v] = 1
        elif v < i:
            perm[v] = v + 1
        else:
            perm[v] = v
    edges = tuple((perm[t], perm[h]) for t, h in g.edges)
    return Graph(g.node_count, edges), perm


def max_first_order(n, i):
    """Index order (0-based) taking node i first, then the rest in order."""
    return np.array([i - 1] + [v for v in range(n) if v != i - 1], dtype=np.intp)
