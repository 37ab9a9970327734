"""Six-node reference instance with a three-way exceedance tie.

Exact PTDF matrices, the expected failure order and the limiting
exceedance values, used by ``cascadia repro-example`` and the test suite.
Exceedance values are functions of (lam, lam_star) and hold in the limit
eps -> 0; the tied value at the fourth step is exact for every eps.
"""
from __future__ import annotations

import numpy as np

NODES = 6
EDGES = ((2, 1), (3, 1), (4, 1), (5, 1), (2, 3), (2, 4), (2, 5), (6, 2), (4, 3), (5, 3), (5, 4))
GAMMA = (0.0, 0.10, 0.30, 0.28, 0.27, 0.05)
EPSILON = 1e-4
LAM = 0.5
LAM_STAR = 0.55
FIRST_EDGE = 7

V_FULL = np.array([
    [7, -5, 1, 1, 1, -5],
    [6, 0, -6, 0, 0, 0],
    [6, 0, 0, -6, 0, 0],
    [6, 0, 0, 0, -6, 0],
    [1, -5, 7, 1, 1, -5],
    [1, -5, 1, 7, 1, -5],
    [1, -5, 1, 1, 7, -5],
    [5, 5, 5, 5, 5, -25],
    [0, 0, 6, -6, 0, 0],
    [0, 0, 6, 0, -6, 0],
    [0, 0, 0, 6, -6, 0],
]) / 30.0

# after edge 7 fails
V_AFTER_7 = np.array([
    [22, -20, 4, 4, 10, -20],
    [18, 0, -18, 0, 0, 0],
    [18, 0, 0, -18, 0, 0],
    [17, 5, -1, -1, -25, 5],
    [4, -20, 22, 4, 10, -20],
    [4, -20, 4, 22, 10, -20],
    [0, 0, 0, 0, 0, 0],
    [15, 15, 15, 15, 15, -75],
    [0, 0, 18, -18, 0, 0],
    [-1, 5, 17, -1, -25, 5],
    [-1, 5, -1, 17, -25, 5],
]) / 90.0

# after edges 7 and 11 fail
V_AFTER_7_11 = np.array([
    [59, -55, 11, 5, 35, -55],
    [48, 0, -48, 0, 0, 0],
    [49, -5, 1, -65, 25, -5],
    [44, 20, -4, 20, -100, 20],
    [11, -55, 59, 5, 35, -55],
    [10, -50, 10, 70, 10, -50],
    [0, 0, 0, 0, 0, 0],
    [40, 40, 40, 40, 40, -200],
    [1, -5, 49, -65, 25, -5],
    [-4, 20, 44, 20, -100, 20],
    [0, 0, 0, 0, 0, 0],
]) / 240.0

# after edges 7, 10 and 11 fail
V_AFTER_7_10_11 = np.array([
    [6, -6, 0, 0, 6, -6],
    [5, -1, -7, -1, 5, -1],
    [5, -1, -1, -7, 5, -1],
    [4, 4, 4, 4, -20, 4],
    [1, -5, 7, 1, 1, -5],
    [1, -5, 1, 7, 1, -5],
    [0, 0, 0, 0, 0, 0],
    [4, 4, 4, 4, 4, -20],
    [0, 0, 6, -6, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
]) / 24.0

PTDF_AFTER = {
    (): V_FULL,
    (7,): V_AFTER_7,
    (7, 11): V_AFTER_7_11,
    (7, 10, 11): V_AFTER_7_10_11,
}

TIED_EDGES = (5, 6, 9)

# failure order while lam_star lies in [lam, 5 lam / 4)
ORDER_NORMAL = ((7,), (11,), (10,), (5, 6, 9))
# once lam_star >= 5 lam / 4 the tied edges stay below capacity
ORDER_HIGH_EMERGENCY = ((7,), (11,), (10,))


def limiting_exceedances(lam, lam_star):
    """{step (0-based, after that step's failures): {edge: psi}} at eps -> 0.

    Step 1 is the state after edge 7 fails, step 3 after edges 7, 11, 10.
    """
    r = lam / lam_star
    return {
        1: {1: 22 * r / 21, 4: 17 * r / 18, 5: 4 * r / 3, 6: 4 * r / 3},
        2: {1: 59 * r / 56, 3: 49 * r / 48, 4: 44 * r / 48, 5: 11 * r / 8, 6: 10 * r / 8},
        3: {1: 30 * r / 28, 2: 25 * r / 24, 3: 25 * r / 24, 4: 20 * r / 24, 8: r,
            5: 5 * r / 4, 6: 5 * r / 4, 9: 5 * r / 4},
    }


def tied_exceedance(lam, lam_star):
    return 5 * lam / (4 * lam_star)


def graph():
    from .graph_core import build_graph
    return build_graph(NODES, EDGES)


def golden_bundle():
    """Everything the repro command diffs against, as one mutable dict."""
    return {
        "ptdf": {k: v.copy() for k, v in PTDF_AFTER.items()},
        "order_normal": ORDER_NORMAL,
        "order_high_emergency": ORDER_HIGH_EMERGENCY,
        "tied_edges": TIED_EDGES,
        "skew_symmetric": True,
    }
