"""Pure-Python implementations of the hot kernels.

The compiled module ``cascadia._ckernels`` exposes ``solve_generation``,
``cascade_outcome`` and ``simulate_block`` with the same signatures;
``cascadia.kernels`` picks one at import time. ``project_affine`` is only
needed here.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalFailure

BACKEND = "python"

DEPENDENT_TOL = 1e-10   # Gram-Schmidt residual below this (relative) => dependent row
STEP_TOL = 1e-12        # a step shorter than this (relative) counts as zero
MULT_TOL = 1e-12        # multipliers above -MULT_TOL*scale count as nonnegative
EQ_TOL = 1e-12          # bound width below this (relative) => equality edge
RATIO_TOL = 1e-13       # directional derivative below this is treated as parallel


# ---------------------------------------------------------------------------
# Projection onto an affine face
# ---------------------------------------------------------------------------

def project_affine(z, rows, rhs):
    """Project z onto {x : rows x = rhs} using ordered Gram-Schmidt.

    Rows that are (numerically) dependent on earlier rows are skipped.
    Returns the projection and, per input row, the multiplier y with
    projection - z = rows^T y (zero for skipped rows).
    """
    k = len(rows)
    qs, cs, kept = [], [], []
    tri = np.zeros((k, k))
    for i in range(k):
        a = np.array(rows[i], dtype=float)
        b = float(rhs[i])
        norm0 = np.sqrt(a @ a)
        for _ in range(2):
            for j, (q, c) in enumerate(zip(qs, cs)):
                t = q @ a
                a -= t * q
                b -= t * c
                tri[j, len(kept)] += t
        nrm = np.sqrt(a @ a)
        if nrm <= DEPENDENT_TOL * norm0 or norm0 == 0.0:
            tri[:, len(kept)] = 0.0
            continue
        tri[len(kept), len(kept)] = nrm
        qs.append(a / nrm)
        cs.append(b / nrm)
        kept.append(i)
    x = np.array(z, dtype=float)
    beta = np.zeros(len(kept))
    for j, (q, c) in enumerate(zip(qs, cs)):
        beta[j] = c - q @ z
        x += beta[j] * q
    r = len(kept)
    ykept = np.zeros(r)
    for i in range(r - 1, -1, -1):
        ykept[i] = (beta[i] - tri[i, i + 1:r] @ ykept[i + 1:r]) / tri[i, i]
    y = np.zeros(k)
    y[kept] = ykept
    return x, y


# ---------------------------------------------------------------------------
# Active-set solver for the projection of mean(d)*e onto the feasible region
# ---------------------------------------------------------------------------

def solve_generation(vrows, lower, upper, demand, max_pivots):
    """Primal active-set method for min ||g - mean(d) e|| subject to
    sum(g) = sum(d) and lower <= vrows g <= upper.

    Constraint ids: 0 is the balance row, e (1..m) the lower bound of edge e,
    m + e its upper bound. Edges with lower == upper enter the working set
    once, as an equality under their lower id.

    Returns (generation, working ids, multipliers aligned with the ids,
    pivot count).
    """
    vrows = np.asarray(vrows, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = np.asarray(demand, dtype=float)
    m, n = vrows.shape
    total = d.sum()
    z = np.full(n, total / n)
    scale = max(np.abs(d).max(), 1e-300)
    width = upper - lower
    eq = width <= EQ_TOL * max(width.max(initial=0.0), 1e-300)
    rownorm = np.sqrt((vrows * vrows).sum(axis=1))
    ones = np.ones(n)

    def row(cid):
        return ones if cid == 0 else vrows[(cid - 1) % m]

    def rhs(cid):
        if cid == 0:
            return total
        return lower[cid - 1] if cid <= m else upper[cid - m - 1]

    work = [0] + [e + 1 for e in range(m) if eq[e]]
    x = d.copy()
    for pivot in range(1, max_pivots + 1):
        proj, y = project_affine(z, [row(c) for c in work], [rhs(c) for c in work])
        step = proj - x
        if np.abs(step).max() <= STEP_TOL * scale:
            x = proj
            worst, worst_at = -MULT_TOL * scale, -1
            for pos, cid in enumerate(work):
                if cid == 0 or (cid <= m and eq[cid - 1]):
                    continue
                lam = y[pos] if cid <= m else -y[pos]
                if lam < worst:
                    worst, worst_at = lam, pos
            if worst_at < 0:
                return x, list(work), y, pivot
            del work[worst_at]
            continue
        vx = vrows @ x
        vp = vrows @ step
        pnorm = np.sqrt(step @ step)
        alpha, block = 1.0, -1
        active = set(work)
        for e in range(m):
            if eq[e]:
                continue
            thr = RATIO_TOL * rownorm[e] * pnorm
            if vp[e] < -thr and (e + 1) not in active:
                a = (vx[e] - lower[e]) / -vp[e]
                if a < alpha:
                    alpha, block = a, e + 1
            if vp[e] > thr and (m + e + 1) not in active:
                a = (upper[e] - vx[e]) / vp[e]
                if a < alpha:
                    alpha, block = a, m + e + 1
        x = x + max(alpha, 0.0) * step
        if block >= 0:
            work.append(block)
    raise NumericalFailure(f"active-set iteration exceeded {max_pivots} pivots")


# ---------------------------------------------------------------------------
# Cascade loop and Monte Carlo block (thin adapters over the reference engine)
# ---------------------------------------------------------------------------

ZERO_FLOW = 1e-12
NEG_GEN_TOL = 1e-9

_RULES = ("break_all", "smallest_label", "largest_label")


def _graph_from_arrays(tails, heads, n):
    from .graph_core import Graph
    return Graph(int(n), tuple((int(t), int(h)) for t, h in zip(tails, heads)))


def cascade_outcome(tails, heads, n, demand, generation, capacity, first_edge, rule, rel_tol):
    """Failure order, per-step failure counts, end demand and end component labels."""
    from .cascade_engine import run_cascade
    from .power_flow import LimitSet
    g = _graph_from_arrays(tails, heads, n)
    cap = np.asarray(capacity, dtype=float)
    limits = LimitSet(cap, cap, float("nan"), float("nan"))
    trace = run_cascade(g, demand, generation, limits, int(first_edge), _RULES[rule], rel_tol)
    order = np.array([e for s in trace.steps for e in s.failed_edges], dtype=np.intp)
    sizes = np.array([len(s.failed_edges) for s in trace.steps], dtype=np.intp)
    return order, sizes, trace.end_demand.copy(), trace.end_components.labels(int(n))


def simulate_block(tails, heads, n, vfull, demands, first_edges, lam, lam_star, rule,
                   rel_tol, max_pivots):
    """Failure size for each row of ``demands`` (see the compiled twin for status codes)."""
    vfull = np.asarray(vfull, dtype=float)
    demands = np.asarray(demands, dtype=float)
    sizes = np.zeros(demands.shape[0])
    status = np.zeros(demands.shape[0], dtype=np.intc)
    for b, d in enumerate(demands):
        vd = vfull @ d
        sgn = np.where(vd < 0, -1.0, 1.0)
        vd = np.abs(vd)
        try:
            g = solve_generation(sgn[:, None] * vfull, (1 - lam) * vd, (1 + lam) * vd, d, max_pivots)[0]
        except NumericalFailure:
            status[b] = 1
            continue
        if g.min() < -NEG_GEN_TOL * max(1.0, np.abs(d).max()):
            status[b] = 2
            continue
        end = cascade_outcome(tails, heads, n, d, g, lam_star * vd, int(first_edges[b]), rule, rel_tol)[2]
        sizes[b] = np.sum(d - end)
    return sizes, status
