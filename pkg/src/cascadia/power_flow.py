"""DC power flow: PTDF matrix, flows and planning-stage edge limits.

Susceptances are fixed to one (B = I), so V = C (C^T C)^+.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidLoadingFactor, ValidationError
from .graph_core import incidence_matrix

PINV_CUTOFF = 1e-10


@dataclass(frozen=True)
class PtdfSystem:
    """PTDF of a (possibly partial) graph.

    ``v`` is always m x n; rows of removed edges are zero and those edges are
    absent from ``surviving``.
    """
    v: np.ndarray
    graph: object
    surviving: tuple
    susceptance_note: str = "B = I"

    @property
    def alive_mask(self):
        mask = np.zeros(self.graph.m, dtype=bool)
        mask[np.asarray(self.surviving, dtype=np.intp) - 1] = True
        return mask


@dataclass(frozen=True)
class LimitSet:
    operational: np.ndarray
    emergency: np.ndarray
    lam: float
    lam_star: float


@dataclass(frozen=True)
class NetworkState:
    demand: np.ndarray
    generation: np.ndarray
    surviving: tuple
    flow: np.ndarray | None = field(default=None)  # length m, NaN on removed edges

    def with_flow(self, flow):
        return replace(self, flow=flow)


def laplacian_pinv(lap):
    """Pseudo-inverse of a symmetric PSD matrix by eigendecomposition."""
    w, u = np.linalg.eigh(lap)
    top = w.max() if w.size else 0.0
    if top <= 0:
        return np.zeros_like(lap)
    keep = w > PINV_CUTOFF * top
    return (u[:, keep] / w[keep]) @ u[:, keep].T


def compute_ptdf(g, surviving_edges=None):
    """PTDF on the subgraph made of ``surviving_edges`` (all edges by default)."""
    if surviving_edges is None:
        surviving = tuple(g.edge_ids())
    else:
        surviving = tuple(sorted(int(e) for e in surviving_edges))
    if not surviving:
        raise ValidationError("PTDF needs at least one surviving edge")
    c = incidence_matrix(g, surviving)
    v = c @ laplacian_pinv(c.T @ c)
    return PtdfSystem(v, g, surviving)


def flow(p, d, g):
    """Edge flows V(d - g); removed edges come back as NaN."""
    d = np.asarray(d, dtype=float)
    g = np.asarray(g, dtype=float)
    n = p.v.shape[1]
    if d.shape != (n,) or g.shape != (n,):
        raise ValidationError(f"demand and generation must have length {n}")
    f = p.v @ (d - g)
    f[~p.alive_mask] = np.nan
    return f


def check_loading(lam, lam_star=None):
    if not (0.0 < lam < 1.0):
        raise InvalidLoadingFactor(f"loading factor must lie in (0, 1), got {lam}")
    if lam_star is not None and not lam_star >= lam:
        raise InvalidLoadingFactor(f"emergency factor {lam_star} is below the loading factor {lam}")


def planning_stage(p, d, lam, lam_star=None):
    """Operational limits lam*|Vd| and emergency limits lam_star*|Vd|.

    The planning dispatch is the uniform generation mean(d)*e, whose flow
    equals V d because V e = 0.
    """
    lam_star = lam if lam_star is None else lam_star
    check_loading(lam, lam_star)
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or not np.any(d > 0):
        raise ValidationError("demand must be nonnegative and not identically zero")
    base = np.abs(p.v @ d)
    return LimitSet(lam * base, lam_star * base, float(lam), float(lam_star))
