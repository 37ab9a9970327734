"""Exact conditions for two edges to share the same relative exceedance.

For d = e1 + eps*gamma and g* = A d, the exceedances of edges j and k on a
connected post-failure graph agree for all small eps iff the coefficients of
a quadratic polynomial in eps vanish. With M = A - I and

    Q = v_j^T w_k - v_k^T w_j    (flows of equal sign)
    Q = v_j^T w_k + v_k^T w_j    (otherwise)

(v rows of the initial PTDF, w rows of the current one) the coefficients are
e1^T Q M e1, e1^T (Q M + M^T Q^T) gamma and gamma^T Q M gamma. Skew-symmetry
of Q M makes all three vanish for every gamma.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dcopf_solver import projection_matrix
from .errors import Inapplicable, NoStabilization, NumericalFailure
from .graph_core import connected_components
from .power_flow import compute_ptdf, flow
from .scenarios import check_gamma, operating_point, stabilize_epsilon

COND_TOL = 1e-8
SKEW_TOL = 1e-9
SIGN_DEAD_ZONE = 1e-12


@dataclass(frozen=True)
class TieQuery:
    edge_j: int
    edge_k: int
    v_j: np.ndarray
    v_k: np.ndarray
    v_j_r: np.ndarray
    v_k_r: np.ndarray
    same_sign: bool
    a_matrix: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        n = self.gamma.shape[0]
        for row in (self.v_j, self.v_k, self.v_j_r, self.v_k_r):
            if row.shape != (n,):
                raise ValueError("PTDF rows and gamma must have the same length")
        check_gamma(self.gamma, n)


class TieConditions(NamedTuple):
    constant: bool
    linear: bool
    quadratic: bool

    @property
    def all(self):
        return self.constant and self.linear and self.quadratic


def q_matrix(q):
    if q.same_sign:
        return np.outer(q.v_j, q.v_k_r) - np.outer(q.v_k, q.v_j_r)
    return np.outer(q.v_j, q.v_k_r) + np.outer(q.v_k, q.v_j_r)


def tie_residuals(Q, A, gamma):
    """The three polynomial coefficients (constant, linear, quadratic in eps)."""
    Q = np.asarray(Q, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    qm = Q @ (np.asarray(A, dtype=float) - np.eye(Q.shape[0]))
    e1 = np.zeros(Q.shape[0])
    e1[0] = 1.0
    return (float(e1 @ qm @ e1),
            float(e1 @ (qm + qm.T) @ gamma),
            float(gamma @ qm @ gamma))


def _residual_scale(Q, A, gamma):
    qn = np.linalg.norm(Q, 2)
    mn = np.linalg.norm(np.asarray(A, dtype=float) - np.eye(Q.shape[0]), 2)
    gn = np.linalg.norm(gamma)
    base = qn * mn
    return base, 2 * base * gn, base * gn * gn


def tie_conditions(Q, A, gamma, tol=COND_TOL):
    """Whether each coefficient vanishes, relative to the operator norms involved."""
    res = tie_residuals(Q, A, gamma)
    scales = _residual_scale(np.asarray(Q, dtype=float), A, np.asarray(gamma, dtype=float))
    return TieConditions(*(bool(abs(r) <= tol * s) for r, s in zip(res, scales)))


def skew_symmetry_check(Q, A, tol=SKEW_TOL):
    """True iff Q (A - I) is skew-symmetric up to ``tol`` relative to its max entry."""
    Q = np.asarray(Q, dtype=float)
    A = np.asarray(A, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or A.shape != Q.shape:
        raise ValueError("Q and A must be square matrices of the same size")
    qm = Q @ (A - np.eye(Q.shape[0]))
    top = np.abs(qm).max(initial=0.0)
    return bool(np.abs(qm + qm.T).max(initial=0.0) <= tol * top)


def uniform_projection(n, lam):
    """A for the face with only the balance constraint: (1-lam) I + (lam/n) J."""
    return (1 - lam) * np.eye(n) + (lam / n) * np.ones((n, n))


# ---------------------------------------------------------------------------
# Building queries from a network and a failure prefix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrefixState:
    """Operating point and post-failure quantities after removing ``failed``."""
    op: object
    a_matrix: np.ndarray
    v: np.ndarray           # initial PTDF (oriented)
    v_r: np.ndarray         # PTDF of the post-failure graph, zero rows on removed edges
    flows: np.ndarray
    psi: np.ndarray
    surviving: tuple


def prefix_state(graph, gamma, lam, failed, epsilon=1e-4, lam_star=None):
    """Dispatch d = e1 + eps*gamma on ``graph`` (max node already at label 1), then remove ``failed``.

    Raises Inapplicable if the post-failure graph is disconnected, since the
    exceedances are then no longer linear in the original demand.
    """
    gamma = check_gamma(gamma, graph.n)
    lam_star = lam if lam_star is None else lam_star
    failed = {int(e) for e in failed}
    bad = [e for e in failed if not 1 <= e <= graph.m]
    if bad:
        raise ValueError(f"failed edges {bad} outside [1, {graph.m}]")
    op = operating_point(graph, gamma, epsilon, lam, lam_star)
    surviving = tuple(e for e in op.graph.edge_ids() if e not in failed)
    if connected_components(op.graph, surviving).component_count != 1:
        raise Inapplicable("the post-failure graph is disconnected; the tie conditions assume no rescaling")
    post = compute_ptdf(op.graph, surviving)
    f = flow(post, op.demand, op.solution.generation)
    cap = op.limits.emergency
    psi = np.full(graph.m, np.nan)
    for e in surviving:
        psi[e - 1] = abs(f[e - 1]) / cap[e - 1] if cap[e - 1] > 0 else np.inf
    a = projection_matrix(op.ptdf, op.active_set, lam)
    return PrefixState(op, a, op.ptdf.v, post.v, f, psi, surviving)


def same_sign(fj, fk, scale=1.0):
    """f_j f_k >= 0, with flows inside the dead zone counted as zero."""
    dz = SIGN_DEAD_ZONE * scale
    if abs(fj) <= dz or abs(fk) <= dz:
        return True
    return bool(fj * fk >= 0)


def query_from_state(state, gamma, edge_j, edge_k):
    for e in (edge_j, edge_k):
        if e not in state.surviving:
            raise ValueError(f"edge {e} is not in the post-failure graph")
    j, k = edge_j - 1, edge_k - 1
    scale = max(1.0, float(np.abs(state.op.demand).max()))
    return TieQuery(int(edge_j), int(edge_k), state.v[j], state.v[k], state.v_r[j], state.v_r[k],
                    same_sign(state.flows[j], state.flows[k], scale), state.a_matrix,
                    np.asarray(gamma, dtype=float))


def build_tie_query(graph, gamma, lam, failed, edge_j, edge_k, epsilon=1e-4, lam_star=None):
    state = prefix_state(graph, gamma, lam, failed, epsilon, lam_star)
    return query_from_state(state, gamma, edge_j, edge_k)


def analyze(graph, gamma, lam, failed, edge_j, edge_k, epsilon=1e-4, lam_star=None):
    """Q, coefficient residuals, condition verdicts and skew-symmetry for one pair."""
    q = build_tie_query(graph, gamma, lam, failed, edge_j, edge_k, epsilon, lam_star)
    Q = q_matrix(q)
    return {
        "edges": [q.edge_j, q.edge_k],
        "same_sign": q.same_sign,
        "Q": Q.tolist(),
        "residuals": list(tie_residuals(Q, q.a_matrix, q.gamma)),
        "conditions": list(tie_conditions(Q, q.a_matrix, q.gamma)),
        "skew_symmetric": skew_symmetry_check(Q, q.a_matrix),
        "e_in_kernel_of_Q": bool(np.abs(Q @ np.ones(Q.shape[0])).max(initial=0.0)
                                 <= SKEW_TOL * max(np.abs(Q).max(initial=0.0), 1e-300)),
    }


# ---------------------------------------------------------------------------
# Conditions versus simulated exceedances
# ---------------------------------------------------------------------------

EPS_LADDER = (1e-3, 1e-4, 1e-5)
PSI_TOL = 1e-8


@dataclass
class SoundnessReport:
    instances: int = 0
    skipped: int = 0
    pairs: int = 0
    predicted_ties: int = 0
    simulated_ties: int = 0
    mismatches: list = field(default_factory=list)


def _psi_equal(a, b, tol=PSI_TOL):
    if not (np.isfinite(a) and np.isfinite(b)):
        return False
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def check_prefix(graph, gamma, lam, lam_star, failed, eps_values, report, tag=None):
    """Compare conditions and simulated equality for every surviving pair after ``failed``."""
    states = [prefix_state(graph, gamma, lam, failed, eps, lam_star) for eps in eps_values]
    if len({s.op.active_set for s in states}) != 1:
        report.skipped += 1
        return
    base = states[len(states) // 2]
    live = [e for e in base.surviving
            if all(np.isfinite(s.psi[e - 1]) and s.op.limits.emergency[e - 1] > 0 for s in states)]
    for a_pos, j in enumerate(live):
        for k in live[a_pos + 1:]:
            q = query_from_state(base, gamma, j, k)
            predicted = tie_conditions(q_matrix(q), q.a_matrix, q.gamma).all
            simulated = all(_psi_equal(s.psi[j - 1], s.psi[k - 1]) for s in states)
            report.pairs += 1
            report.predicted_ties += predicted
            report.simulated_ties += simulated
            if predicted != simulated:
                report.mismatches.append({
                    "tag": tag, "failed": sorted(failed), "pair": [j, k],
                    "predicted": predicted, "simulated": simulated,
                    "psi": [[float(s.psi[j - 1]), float(s.psi[k - 1])] for s in states],
                })


def soundness_experiment(graphs, alpha, lam, lam_star, seed, rule="break_all"):
    """Bidirectional check of the tie conditions on cascades over ``graphs``.

    For each graph a gamma (on nodes 2..n) and a first edge are drawn, eps is
    stabilized, and every connected post-failure prefix of the cascade is
    checked at three eps values below the stabilization threshold.
    """
    from .scenarios import random_gamma
    report = SoundnessReport()
    rng = np.random.default_rng(seed)
    for gi, g in enumerate(graphs):
        gamma = random_gamma(rng, g.n, alpha)
        l = int(rng.integers(1, g.m + 1))
        report.instances += 1
        try:
            out = stabilize_epsilon(g, gamma, 1, l, rule, lam, lam_star)
        except (NoStabilization, NumericalFailure):
            report.skipped += 1
            continue
        factor = min(1.0, out.epsilon / EPS_LADDER[0])
        eps_values = [e * factor for e in EPS_LADDER]
        failed = set()
        for step in out.steps:
            failed |= set(step)
            try:
                check_prefix(g, gamma, lam, lam_star, failed, eps_values, report, tag=gi)
            except Inapplicable:
                break
    return report
