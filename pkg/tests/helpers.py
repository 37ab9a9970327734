"""Shared builders and independent oracles for the tests."""
import numpy as np

from cascadia.dcopf_solver import make_problem
from cascadia.graph_core import flip_edges, orientation_flips
from cascadia.power_flow import compute_ptdf
from cascadia.scenarios import random_connected_graph


def dense_ptdf(g, surviving=None):
    """V = C (C^T C)^+ with numpy's SVD pseudo-inverse (independent of eigh)."""
    alive = list(g.edge_ids()) if surviving is None else list(surviving)
    c = np.zeros((g.m, g.n))
    for e in alive:
        t, h = g.edges[e - 1]
        c[e - 1, h - 1] = 1.0
        c[e - 1, t - 1] = -1.0
    return c @ np.linalg.pinv(c.T @ c)


def oriented(g, d):
    """Graph reoriented so that V d >= 0, with its PTDF."""
    base = compute_ptdf(g)
    flips = orientation_flips(base.v @ d)
    go = flip_edges(g, flips) if flips else g
    return go, compute_ptdf(go)


def random_problem(rng, n_max=4, lam=None):
    n = int(rng.integers(2, n_max + 1))
    g = random_connected_graph(rng, n)
    if rng.random() < 0.5:
        d = (1.0 - rng.random(n)) ** (-1 / 1.5)
    else:
        d = rng.random(n) + 0.01
    if rng.random() < 0.2:
        d[rng.integers(0, n)] = 0.0
    lam = float(rng.uniform(0.05, 0.95)) if lam is None else lam
    go, p = oriented(g, d)
    return go, p, d, make_problem(p, d, lam)


def brute_force_partition(g, surviving):
    """Connected components by repeated BFS, as a set of frozensets."""
    adj = {v: set() for v in range(1, g.n + 1)}
    for e in surviving:
        t, h = g.edges[e - 1]
        adj[t].add(h)
        adj[h].add(t)
    seen, out = set(), set()
    for v in range(1, g.n + 1):
        if v in seen:
            continue
        comp, stack = set(), [v]
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        out.add(frozenset(comp))
    return out
