"""DC optimal power flow as a Euclidean projection.

Minimizing sum(g^2)/2 under balance and flow limits is the same as
projecting mean(d)*e onto the feasible polytope

    F_d = {g : e^T g = e^T d,  (1-lam) V d <= V g <= (1+lam) V d}.

Its 2m+1 bounding hyperplanes are numbered H_0 (balance), H_e for the
lower bound of edge e and H_{m+e} for its upper bound. The orientation must
make V d >= 0 so that lower <= upper.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import BudgetExceeded, NumericalFailure, PreconditionViolated
from .power_flow import check_loading

TIGHT_TOL = 1e-8
KKT_TOL = 1e-7
NEG_GEN_TOL = 1e-9
ORACLE_BUDGET = 2 ** 23


@dataclass(frozen=True)
class OpfProblem:
    ptdf: object
    demand: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    total: float
    lam: float

    @property
    def n(self):
        return self.demand.shape[0]

    @property
    def m(self):
        return self.lower.shape[0]

    @property
    def scale(self):
        return max(1.0, float(np.abs(self.demand).max()))


@dataclass(frozen=True)
class OpfSolution:
    generation: np.ndarray
    active_set: tuple
    mu: np.ndarray
    nu: np.ndarray
    delta: float
    kkt_residual: float
    pivots: int = 0


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    dual_feasibility: float
    complementarity: float
    primal_feasibility: float
    balance: float

    @property
    def max_residual(self):
        return max(self.stationarity, self.dual_feasibility, self.complementarity,
                   self.primal_feasibility, self.balance)

    @property
    def accepted(self):
        return self.max_residual <= KKT_TOL


def make_problem(ptdf, demand, lam, orient_tol=1e-12):
    """Build the program for ``demand`` on an already oriented PTDF."""
    check_loading(lam)
    d = np.asarray(demand, dtype=float)
    if d.shape != (ptdf.v.shape[1],):
        raise PreconditionViolated(f"demand must have length {ptdf.v.shape[1]}")
    if np.any(d < 0) or not d.sum() > 0:
        raise PreconditionViolated("demand must be nonnegative with a positive total")
    vd = ptdf.v @ d
    if np.any(vd < -orient_tol * max(1.0, np.abs(vd).max())):
        bad = [int(e) + 1 for e in np.flatnonzero(vd < 0)]
        raise PreconditionViolated(f"edges {bad} carry negative planning flow; orient the graph first")
    vd = np.maximum(vd, 0.0)
    return OpfProblem(ptdf, d, (1 - lam) * vd, (1 + lam) * vd, float(d.sum()), float(lam))


def _hyperplane(p, i):
    """(row, rhs) of hyperplane H_i."""
    m = p.m
    if i == 0:
        return np.ones(p.n), p.total
    if i <= m:
        return p.ptdf.v[i - 1], p.lower[i - 1]
    return p.ptdf.v[i - m - 1], p.upper[i - m - 1]


def active_index_set(p, g, tol=TIGHT_TOL):
    """Indices of hyperplanes containing ``g`` (0 always included)."""
    g = np.asarray(g, dtype=float)
    vg = p.ptdf.v @ g
    out = [0]
    for e in range(p.m):
        if abs(vg[e] - p.lower[e]) <= tol * max(1.0, abs(p.lower[e])):
            out.append(e + 1)
    for e in range(p.m):
        if abs(vg[e] - p.upper[e]) <= tol * max(1.0, abs(p.upper[e])):
            out.append(p.m + e + 1)
    return tuple(out)


def verify_kkt(p, s):
    """Residuals of the optimality system, scaled by max(1, max d)."""
    g = np.asarray(s.generation, dtype=float)
    v = p.ptdf.v
    sc = p.scale
    vg = v @ g
    stat = g + v.T @ (s.nu - s.mu) + s.delta * np.ones(p.n)
    dual = max(0.0, -float(np.min(s.mu, initial=0.0)), -float(np.min(s.nu, initial=0.0)))
    comp = max(float(np.max(np.abs(s.mu * (p.lower - vg)), initial=0.0)),
               float(np.max(np.abs(s.nu * (p.upper - vg)), initial=0.0)))
    primal = max(0.0, float(np.max(p.lower - vg, initial=0.0)), float(np.max(vg - p.upper, initial=0.0)))
    bal = abs(g.sum() - p.total)
    return KktReport(float(np.abs(stat).max()) / sc, dual / sc, comp / sc ** 2, primal / sc, bal / sc)


def _finish(p, g, mu, nu, delta, pivots=0):
    if np.any(g < -NEG_GEN_TOL * p.scale):
        raise NumericalFailure(f"optimal generation has a negative entry ({g.min():.3e})")
    sol = OpfSolution(g, active_index_set(p, g), mu, nu, float(delta), 0.0, pivots)
    res = verify_kkt(p, sol).max_residual
    sol = OpfSolution(g, sol.active_set, mu, nu, float(delta), res, pivots)
    if res > KKT_TOL:
        raise NumericalFailure(f"KKT residual {res:.3e} exceeds {KKT_TOL}")
    return sol


def solve(p, backend=None):
    """Unique optimal generation with an optimality certificate."""
    m = p.m
    impl = kernels.get(backend)
    g, work, y, pivots = impl.solve_generation(p.ptdf.v, p.lower, p.upper, p.demand, 10 * (2 * m + 1))
    g = np.asarray(g)
    width = p.upper - p.lower
    eq = width <= impl.EQ_TOL * max(width.max(initial=0.0), 1e-300)
    mu = np.zeros(m)
    nu = np.zeros(m)
    y0 = 0.0
    for cid, yi in zip(work, y):
        if cid == 0:
            y0 = yi
        elif cid <= m and eq[cid - 1]:
            mu[cid - 1] = max(yi, 0.0)
            nu[cid - 1] = max(-yi, 0.0)
        elif cid <= m:
            mu[cid - 1] = yi
        else:
            nu[cid - m - 1] = -yi
    delta = -(p.total / p.n + y0)
    return _finish(p, g, mu, nu, delta, pivots)


def independent_rows(block, tol=1e-10):
    """Indices (sorted) of a maximal independent row subset, via pivoted QR."""
    block = np.asarray(block, dtype=float)
    if block.shape[0] == 0:
        return []
    _, r, piv = scipy.linalg.qr(block.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return []
    rank = int(np.sum(diag > tol * max(diag[0], np.linalg.norm(block))))
    return sorted(int(i) for i in piv[:rank])


def projection_matrix(ptdf, index_set, lam):
    """A_I with g = A_I d the projection of mean(d) e onto the face I.

    A_I = J/n + B^T (B B^T)^+ R, where B stacks the PTDF rows of the lower
    and upper hyperplanes in I (dependent rows removed) and R scales them by
    (1-lam) and (1+lam) respectively.
    """
    v = ptdf.v
    m, n = v.shape
    idx = sorted(set(index_set))
    if 0 not in idx:
        raise PreconditionViolated("index set must contain the balance hyperplane 0")
    rows, coef = [], []
    for i in idx[1:]:
        if 1 <= i <= m:
            rows.append(v[i - 1])
            coef.append(1 - lam)
        elif m < i <= 2 * m:
            rows.append(v[i - m - 1])
            coef.append(1 + lam)
        else:
            raise PreconditionViolated(f"hyperplane index {i} outside [0, {2 * m}]")
    a = np.full((n, n), 1.0 / n)
    if not rows:
        return a
    block = np.array(rows)
    keep = independent_rows(block)
    b = block[keep]
    r = b * np.array(coef)[keep][:, None]
    return a + b.T @ np.linalg.pinv(b @ b.T) @ r


def closed_form_generation(d, lam, incidence):
    """(1-lam) d + lam mean(d) e, valid when C d >= 0."""
    d = np.asarray(d, dtype=float)
    cd = np.asarray(incidence) @ d
    if np.any(cd < -1e-12 * max(1.0, np.abs(d).max())):
        raise PreconditionViolated("closed form needs C d >= 0")
    return (1 - lam) * d + lam * d.mean()


def closed_form_multipliers(d, lam, incidence):
    """Multipliers certifying the closed form: mu = (1-lam) C d, nu = 0, delta = -mean(d)."""
    d = np.asarray(d, dtype=float)
    mu = (1 - lam) * (np.asarray(incidence) @ d)
    return mu, np.zeros_like(mu), -float(d.mean())


def _lstsq_multipliers(p, g, active):
    m = p.m
    rows = [_hyperplane(p, i)[0] for i in active]
    z = np.full(p.n, p.total / p.n)
    y = np.linalg.lstsq(np.array(rows).T, g - z, rcond=None)[0]
    mu = np.zeros(m)
    nu = np.zeros(m)
    y0 = 0.0
    for i, yi in zip(active, y):
        if i == 0:
            y0 = yi
        elif i <= m:
            mu[i - 1] += yi
        else:
            nu[i - m - 1] -= yi
    # a lower/upper pair on a zero-width edge is one equality: split its sign
    for e in range(m):
        if (e + 1) in active and (m + e + 1) in active:
            net = mu[e] - nu[e]
            mu[e], nu[e] = max(net, 0.0), max(-net, 0.0)
    return mu, nu, -(p.total / p.n + y0)


def face_enumeration_oracle(p):
    """Exhaustive reference solver: best feasible projection over all faces.

    Each edge contributes none, its lower or its upper hyperplane (both at
    once describe an empty face unless the bounds coincide, in which case
    either one already pins the flow).
    """
    m = p.m
    if 2 * m + 1 > 23 or 2 ** (2 * m) > ORACLE_BUDGET:
        raise BudgetExceeded(f"{2 * m + 1} hyperplanes exceed the enumeration budget")
    d = p.demand
    z = np.full(p.n, p.total / p.n)
    sc = p.scale
    best, best_obj = None, np.inf
    for choice in itertools.product((0, 1, 2), repeat=m):
        face = [0] + [e + 1 if c == 1 else m + e + 1 for e, c in enumerate(choice) if c]
        g = projection_matrix(p.ptdf, face, p.lam) @ d
        vg = p.ptdf.v @ g
        tol = 1e-9 * sc
        if np.any(vg < p.lower - tol) or np.any(vg > p.upper + tol) or abs(g.sum() - p.total) > tol:
            continue
        obj = float((g - z) @ (g - z))
        if obj < best_obj - 1e-15 * sc * sc:
            best, best_obj = g, obj
    active = active_index_set(p, best)
    mu, nu, delta = _lstsq_multipliers(p, best, active)
    sol = OpfSolution(best, active, mu, nu, float(delta), 0.0)
    return OpfSolution(best, active, mu, nu, float(delta), verify_kkt(p, sol).max_residual)
