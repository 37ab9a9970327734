"""Emergency stage: failure propagation after an exogenous edge outage.

Each step recomputes the PTDF on the surviving edges, restores the
demand/generation balance inside every connected component, computes the
relative exceedances |f|/F against the fixed emergency limits and removes
the exceedance maximizers chosen by the tie-breaking rule.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph_core import connected_components
from .power_flow import NetworkState, compute_ptdf, flow

REL_TOL = 1e-9          # exceedances within this (relative) of the max are tied
ZERO_FLOW = 1e-12       # flow magnitude counted as zero on a zero-capacity edge


class TieBreakRule(enum.Enum):
    BREAK_ALL = "break_all"
    SMALLEST_LABEL = "smallest_label"
    LARGEST_LABEL = "largest_label"

    @property
    def code(self):
        return _RULE_CODES[self]

    def apply(self, maximizers):
        ids = sorted(maximizers)
        if not ids:
            return ()
        if self is TieBreakRule.SMALLEST_LABEL:
            return (ids[0],)
        if self is TieBreakRule.LARGEST_LABEL:
            return (ids[-1],)
        return tuple(ids)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace("-", "_"))
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown tie-break rule {value!r} (choose from {names})") from None


_RULE_CODES = {TieBreakRule.BREAK_ALL: 0, TieBreakRule.SMALLEST_LABEL: 1, TieBreakRule.LARGEST_LABEL: 2}


@dataclass(frozen=True)
class CascadeStep:
    failed_edges: tuple
    theta: dict            # component id -> sum(d)/sum(g) before restoration
    state: NetworkState    # after restoration, with flows
    psi: np.ndarray        # exceedances on the post-step graph (NaN on removed edges)


@dataclass(frozen=True)
class CascadeTrace:
    steps: tuple
    initial_demand: np.ndarray
    end_demand: np.ndarray
    end_components: object
    failure_size: float
    disconnected_from_max: int
    max_node: int

    @property
    def failure_order(self):
        return [s.failed_edges for s in self.steps]

    def to_json(self):
        return {
            "steps": [
                {
                    "failed_edges": list(s.failed_edges),
                    "theta": {str(k): v for k, v in s.theta.items()},
                    "max_psi": _finite_max(s.psi),
                }
                for s in self.steps
            ],
            "S": self.failure_size,
            "z": self.disconnected_from_max,
            "max_node": self.max_node,
            "end_demand": self.end_demand.tolist(),
            "end_components": [sorted(c) for c in sorted(self.end_components.as_sets(), key=min)],
        }


def _finite_max(psi):
    vals = psi[~np.isnan(psi)]
    if vals.size == 0:
        return None
    top = float(vals.max())
    return top if np.isfinite(top) else "inf"


def balance_ratios(state, parts):
    """theta = sum(d)/sum(g) per component (inf when only demand is left)."""
    labels = parts.labels(state.demand.shape[0])
    out = {}
    for cid in range(1, parts.component_count + 1):
        sel = labels == cid
        sd = state.demand[sel].sum()
        sg = state.generation[sel].sum()
        if sg > 0:
            out[cid] = float(sd / sg)
        else:
            out[cid] = float("inf") if sd > 0 else 1.0
    return out


def restore_balance(state, parts):
    """Scale down whichever of demand or generation is in surplus, per component."""
    d = state.demand.astype(float).copy()
    g = state.generation.astype(float).copy()
    labels = parts.labels(d.shape[0])
    for cid in range(1, parts.component_count + 1):
        sel = labels == cid
        sd = d[sel].sum()
        sg = g[sel].sum()
        if sd == sg:
            continue
        if sg == 0:
            d[sel] = 0.0
        elif sd == 0:
            g[sel] = 0.0
        else:
            theta = sd / sg
            if theta >= 1:
                d[sel] = d[sel] / theta
            else:
                g[sel] = g[sel] * theta
    return NetworkState(d, g, state.surviving, None)


def exceedances(state, limits):
    """|f|/F on surviving edges, NaN elsewhere; zero capacity means inf or 0."""
    f = state.flow
    cap = limits.emergency
    psi = np.full(f.shape, np.nan)
    for e in state.surviving:
        k = e - 1
        a = abs(f[k])
        if cap[k] > 0:
            psi[k] = a / cap[k]
        else:
            psi[k] = np.inf if a > ZERO_FLOW else 0.0
    return psi


def select_failures(psi, rule=TieBreakRule.BREAK_ALL, rel_tol=REL_TOL):
    """Edges to fail next: the rule applied to the exceedance maximizers.

    Returns an empty tuple when no edge exceeds its capacity. Exceedances
    within ``rel_tol`` of 1 are not counted as overloads so that edges sitting
    exactly at their limit stay up despite rounding.
    """
    rule = TieBreakRule.parse(rule)
    psi = np.asarray(psi, dtype=float)
    live = ~np.isnan(psi)
    if not live.any():
        return ()
    top = psi[live].max()
    if not top > 1 + rel_tol:
        return ()
    if np.isinf(top):
        tied = np.flatnonzero(live & np.isinf(psi))
    else:
        tied = np.flatnonzero(live & (psi >= (1 - rel_tol) * top) & (psi > 1 + rel_tol))
    return rule.apply(int(k) + 1 for k in tied)


def _advance(graph, state, surviving, limits):
    parts = connected_components(graph, surviving)
    base = NetworkState(state.demand, state.generation, tuple(surviving), None)
    theta = balance_ratios(base, parts)
    post = restore_balance(base, parts)
    if surviving:
        f = flow(compute_ptdf(graph, surviving), post.demand, post.generation)
    else:
        f = np.full(graph.m, np.nan)
    post = post.with_flow(f)
    return post, theta, exceedances(post, limits), parts


def run_cascade(graph, d, g_star, limits, first_edge, rule=TieBreakRule.BREAK_ALL, rel_tol=REL_TOL):
    """Simulate the emergency stage from the exogenous failure of ``first_edge``."""
    rule = TieBreakRule.parse(rule)
    d = np.asarray(d, dtype=float)
    g_star = np.asarray(g_star, dtype=float)
    if not 1 <= first_edge <= graph.m:
        raise ValueError(f"first edge {first_edge} outside [1, {graph.m}]")
    state = NetworkState(d, g_star, tuple(graph.edge_ids()), None)
    alive = [e for e in graph.edge_ids() if e != first_edge]
    failed = (int(first_edge),)
    steps = []
    while True:
        state, theta, psi, parts = _advance(graph, state, alive, limits)
        steps.append(CascadeStep(failed, theta, state, psi))
        failed = select_failures(psi, rule, rel_tol)
        if not failed:
            break
        alive = [e for e in alive if e not in failed]
    max_node = int(np.argmax(d)) + 1
    home = parts.component_of(max_node)
    z = sum(1 for v in range(1, graph.n + 1) if parts.component_of(v) != home)
    size = float(np.sum(d - state.demand))
    return CascadeTrace(tuple(steps), d, state.demand, parts, size, z, max_node)


def total_failure_size(trace):
    return float(np.sum(trace.initial_demand - trace.end_demand))
