"""Heavy-tailed demand scenarios, small-eps profiles and tail estimation.

Demands are exact Pareto(alpha) with scale 1, so P(X > x) = x^-alpha for
x >= 1. A sampled demand vector is rewritten as y1 * (e1 + eps * gamma)
after moving its largest entry to node 1, and the limit eps -> 0 is
approximated by halving eps until the outcome stops changing.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .cascade_engine import REL_TOL, TieBreakRule, run_cascade
from .dcopf_solver import make_problem, solve
from .errors import InsufficientData, InvalidGamma, NoStabilization, NumericalFailure
from .graph_core import flip_edges, max_first_order, orientation_flips, relabel_first
from .power_flow import check_loading, compute_ptdf, planning_stage

EPS_START = 1e-2
EPS_FLOOR = 1e-8
BLOCK = 4096
GRID_POINTS = 40
MIN_EXCEED = 100


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemandSample:
    x: np.ndarray
    y: np.ndarray
    max_index: int


def pareto(rng, alpha, size):
    """Inverse-CDF Pareto draws with scale 1."""
    u = 1.0 - rng.random(size)          # in (0, 1]
    return u ** (-1.0 / alpha)


def reorder_max_first(x):
    """Move the (first) largest entry to the front; returns (y, 1-based index)."""
    x = np.asarray(x, dtype=float)
    i = int(np.argmax(x)) + 1
    return x[max_first_order(x.shape[0], i)], i


def sample_pareto_demands(n, alpha, seed):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n < 2:
        raise ValueError("need at least two nodes")
    x = pareto(np.random.default_rng(seed), alpha, n)
    y, i = reorder_max_first(x)
    return DemandSample(x, y, i)


def check_gamma(gamma, n=None):
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or (n is not None and gamma.shape[0] != n):
        raise InvalidGamma(f"gamma must be a vector of length {n}")
    if gamma[0] != 0:
        raise InvalidGamma("gamma must vanish at node 1")
    if np.any(gamma < 0):
        raise InvalidGamma("gamma must be nonnegative")
    if abs(gamma.sum() - 1.0) > 1e-9:
        raise InvalidGamma(f"gamma must sum to 1 (got {gamma.sum():.12g})")
    return gamma


def big_jump_profile(gamma, epsilon):
    """d = e1 + eps * gamma."""
    gamma = check_gamma(gamma)
    if epsilon < 0:
        raise InvalidGamma("epsilon must be nonnegative")
    d = epsilon * gamma
    d[0] += 1.0
    return d


def gamma_from_sample(y):
    """(gamma, eps) with y = y1 * (e1 + eps * gamma) for a max-first vector y."""
    y = np.asarray(y, dtype=float)
    rest = y[1:].sum()
    gamma = np.zeros_like(y)
    gamma[1:] = y[1:] / rest
    return gamma, rest / y[0]


def random_gamma(rng, n, alpha):
    """Normalized i.i.d. Pareto ratios on nodes 2..n (node 1 carries zero)."""
    gamma = np.zeros(n)
    draws = pareto(rng, alpha, n - 1)
    gamma[1:] = draws / draws.sum()
    return gamma


def gamma_to_original(gamma1, i):
    """Map a gamma indexed max-first (node i moved to 1) back to original labels."""
    gamma1 = np.asarray(gamma1, dtype=float)
    out = np.empty_like(gamma1)
    out[max_first_order(gamma1.shape[0], i)] = gamma1
    return out


# ---------------------------------------------------------------------------
# Operating point of a small-eps profile and eps stabilization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    graph: object        # max node at label 1, oriented so that V d >= 0
    demand: np.ndarray
    ptdf: object
    limits: object
    solution: object
    active_set: tuple    # canonical
    flipped: tuple


def canonical_active_set(active, m):
    """Sorted index set with upper duplicates of doubly-tight edges dropped."""
    s = set(active)
    return tuple(sorted(i for i in s if not (i > m and (i - m) in s)))


def operating_point(graph1, gamma1, epsilon, lam, lam_star=None):
    """Orient, plan and dispatch for d = e1 + eps * gamma on a max-first graph."""
    d = big_jump_profile(gamma1, epsilon)
    n = graph1.n
    base = compute_ptdf(graph1)
    e1 = np.zeros(n)
    e1[0] = 1.0
    # orient by the flow at this eps; V e1 only settles edges with zero flow
    flips = orientation_flips(base.v @ d, base.v @ e1)
    g = flip_edges(graph1, flips) if flips else graph1
    p = compute_ptdf(g) if flips else base
    limits = planning_stage(p, d, lam, lam_star)
    sol = solve(make_problem(p, d, lam))
    return OperatingPoint(g, d, p, limits, sol, canonical_active_set(sol.active_set, g.m), tuple(flips))


class Stabilized(NamedTuple):
    epsilon: float
    z: int
    active_set: tuple
    steps: tuple                 # per-step failed edge tuples
    end_partition: frozenset     # components in original node labels


def _steps_from(order, sizes):
    out, pos = [], 0
    for s in sizes:
        out.append(tuple(int(e) for e in order[pos:pos + s]))
        pos += s
    return tuple(out)


def cascade_at(op, first_edge, rule, backend=None):
    """Failure steps, end demand and end component labels (max-first labels)."""
    impl = kernels.get(backend)
    g = op.graph
    order, sizes, end, labels = impl.cascade_outcome(
        g.tails(), g.heads(), g.n, op.demand, op.solution.generation,
        op.limits.emergency, int(first_edge), TieBreakRule.parse(rule).code, REL_TOL)
    return _steps_from(order, sizes), end, labels


def stabilize_epsilon(graph, gamma, i, l, rule, lam=0.5, lam_star=None, *,
                      eps_start=EPS_START, eps_floor=EPS_FLOOR, cache=None, backend=None):
    """Halve eps until two consecutive values give the same failure steps and I*.

    ``gamma`` is in the original node labels and must vanish at node ``i``.
    ``cache`` (a dict) may be shared between calls with the same
    (graph, gamma, i, lam, lam_star) to reuse operating points across first
    edges and rules.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma[i - 1] != 0:
        raise InvalidGamma(f"gamma must vanish at the max node {i}")
    graph1, perm = relabel_first(graph, i)
    gamma1 = gamma[max_first_order(graph.n, i)]
    check_gamma(gamma1, graph.n)
    cache = {} if cache is None else cache
    inverse = {new: old for old, new in perm.items()}
    prev = None
    eps = eps_start
    while eps >= eps_floor:
        op = cache.get(eps)
        if op is None:
            op = cache[eps] = operating_point(graph1, gamma1, eps, lam, lam_star)
        steps, _, labels = cascade_at(op, l, rule, backend)
        sig = (op.active_set, steps)
        if prev is not None and sig == prev:
            z = int(np.sum(labels != labels[0]))
            groups = {}
            for new, lab in enumerate(labels, start=1):
                groups.setdefault(int(lab), set()).add(inverse[new])
            part = frozenset(frozenset(s) for s in groups.values())
            return Stabilized(eps, z, op.active_set, steps, part)
        prev = sig
        eps /= 2
    raise NoStabilization(f"outcome still changing at eps = {eps_floor:g} (max node {i}, first edge {l})")


# ---------------------------------------------------------------------------
# Partition probabilities and the tail constant
# ---------------------------------------------------------------------------

class ScenarioKey(NamedTuple):
    max_node: int
    first_edge: int
    z: int
    active_set: tuple


@dataclass
class PartitionTable:
    probabilities: dict              # ScenarioKey -> conditional probability given (i, l)
    totals: dict                     # (i, l) -> replicas that stabilized
    no_stabilization: int
    replicas: int

    @property
    def no_stabilization_rate(self):
        return self.no_stabilization / self.replicas if self.replicas else 0.0

    def rows(self):
        return [(k.max_node, k.first_edge, k.z, k.active_set, p)
                for k, p in sorted(self.probabilities.items())]


def _replica_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def estimate_partition_probs(graph, alpha, lam, lam_star, rule, replicas, seed, backend=None):
    """Estimate P(z, I* | max node i, first edge l) by stratified sampling.

    Replica r is assigned the pair (i, l) number r mod (n m), so every pair
    gets the same share; gamma is drawn as normalized i.i.d. Pareto ratios.
    """
    pairs = [(i, l) for i in range(1, graph.n + 1) for l in graph.edge_ids()]
    counts, totals = {}, {}
    failures = 0
    caches = {}
    for r in range(replicas):
        if r % BLOCK == 0:
            rng = _replica_rng(seed, r // BLOCK)
        i, l = pairs[r % len(pairs)]
        gamma1 = random_gamma(rng, graph.n, alpha)
        gamma = gamma_to_original(gamma1, i)
        key = (i, tuple(gamma1))
        cache = caches.setdefault(key, {})
        try:
            out = stabilize_epsilon(graph, gamma, i, l, rule, lam, lam_star, cache=cache, backend=backend)
        except NoStabilization:
            failures += 1
            continue
        finally:
            if len(caches) > 64:
                caches.clear()
        k = ScenarioKey(i, l, out.z, out.active_set)
        counts[k] = counts.get(k, 0) + 1
        totals[(i, l)] = totals.get((i, l), 0) + 1
    probs = {k: c / totals[(k.max_node, k.first_edge)] for k, c in counts.items()}
    return PartitionTable(probs, totals, failures, replicas)


def theoretical_constant(probs, lam, n, m, alpha, K=1.0):
    """Sum over keys of (K/m) (lam z / n)^alpha P(key | i, l)."""
    if isinstance(probs, PartitionTable):
        probs = probs.probabilities
    total = 0.0
    for key, p in probs.items():
        z = key.z if isinstance(key, ScenarioKey) else key[2]
        total += (K / m) * (lam * z / n) ** alpha * p
    return total


# ---------------------------------------------------------------------------
# Monte Carlo on raw demands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloSample:
    sizes: np.ndarray
    max_demand: np.ndarray
    rest_demand: np.ndarray
    first_edge: np.ndarray
    status: np.ndarray


def _block_task(graph, v, alpha, lam, lam_star, rule_code, seed, block, count, backend):
    rng = _replica_rng(seed, block)
    demands = pareto(rng, alpha, (count, graph.n))
    first = rng.integers(1, graph.m + 1, size=count)
    impl = kernels.get(backend)
    sizes, status = impl.simulate_block(graph.tails(), graph.heads(), graph.n, v, demands, first,
                                        lam, lam_star, rule_code, REL_TOL, 10 * (2 * graph.m + 1))
    top = demands.max(axis=1)
    return sizes, top, demands.sum(axis=1) - top, first, np.asarray(status)


def simulate_failure_sizes(graph, alpha, lam, lam_star, rule, replicas, seed, threads=1, backend=None):
    """Failure size per replica for raw Pareto demands and a uniform first edge.

    Replicas come in fixed blocks of BLOCK, each with its own generator
    seeded from (seed, block index), so results do not depend on ``threads``.
    Node relabeling is skipped because the failure size does not depend on
    node names.
    """
    lam_star = lam if lam_star is None else lam_star
    check_loading(lam, lam_star)
    v = compute_ptdf(graph).v
    code = TieBreakRule.parse(rule).code
    blocks = [(b, min(BLOCK, replicas - b * BLOCK)) for b in range(math.ceil(replicas / BLOCK))]

    def task(bc):
        return _block_task(graph, v, alpha, lam, lam_star, code, seed, bc[0], bc[1], backend)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, blocks))
    else:
        parts = [task(bc) for bc in blocks]
    cols = list(zip(*parts))
    return MonteCarloSample(*(np.concatenate(c) for c in cols))


def hill_estimator(values, k):
    """Hill tail index from the k largest positive values."""
    v = np.asarray(values, dtype=float)
    v = np.sort(v[v > 0])[::-1]
    if k < 1 or k >= v.shape[0]:
        raise InsufficientData(f"need more than k = {k} positive values (have {v.shape[0]})")
    denom = float(np.sum(np.log(v[:k] / v[k])))
    if denom <= 0:
        raise InsufficientData("top order statistics are all equal")
    return k / denom


def survival_curve(sizes, points=GRID_POINTS):
    """(x, P(S > x)) on a log grid from the 90th percentile to the maximum."""
    s = np.sort(np.asarray(sizes, dtype=float))
    lo = np.quantile(s, 0.9)
    if lo <= 0:
        pos = s[s > 0]
        if pos.size == 0:
            return np.zeros(0), np.zeros(0)
        lo = np.quantile(pos, 0.9)
    hi = s[-1]
    if hi <= lo:
        x = np.array([lo])
    else:
        x = np.logspace(np.log10(lo), np.log10(hi), points)
    p = 1.0 - np.searchsorted(s, x, side="right") / s.shape[0]
    return x, p


def plateau_constant(x, p, alpha, count=None, min_exceed=MIN_EXCEED):
    """Median of x^alpha P(S > x) over the top decade of the well-sampled grid.

    With ``count`` (the sample size) given, only grid points backed by at
    least ``min_exceed`` exceedances are used; beyond that the estimate is
    dominated by a handful of order statistics.
    """
    keep = p > 0
    if count is not None:
        keep &= p * count >= min_exceed - 1e-9
    if not keep.any():
        return 0.0
    xs, ps = x[keep], p[keep]
    sel = xs >= xs[-1] / 10.0
    return float(np.median(xs[sel] ** alpha * ps[sel]))


@dataclass
class TailEstimate:
    survival_points: list
    hill_alpha: float
    hill_k: int
    c_hat_empirical: float
    c_theoretical: float
    sample_count: int
    partition: PartitionTable | None = None
    failed_replicas: int = 0
    extras: dict = field(default_factory=dict)


def default_hill_k(replicas):
    return max(1, math.ceil(0.005 * replicas))


def monte_carlo_tail(graph, alpha, lam, lam_star, rule, replicas, seed, hill_k=None, threads=1,
                     partition_replicas=None, backend=None, sample=None):
    """Empirical tail of the failure size next to the predicted constant.

    ``partition_replicas`` sets the sample size of the small-eps estimate of
    the constant (defaults to min(replicas, 10^4); 0 skips it).
    """
    lam_star = lam if lam_star is None else lam_star
    if sample is None:
        sample = simulate_failure_sizes(graph, alpha, lam, lam_star, rule, replicas, seed, threads, backend)
    ok = sample.status == 0
    sizes = sample.sizes[ok]
    k = default_hill_k(replicas) if hill_k is None else int(hill_k)
    x, p = survival_curve(sizes)
    try:
        alpha_hat = hill_estimator(sizes, k)
    except InsufficientData:
        alpha_hat = float("nan")
    if partition_replicas is None:
        partition_replicas = min(replicas, 10_000)
    table = None
    c_theory = float("nan")
    if partition_replicas > 0:
        table = estimate_partition_probs(graph, alpha, lam, lam_star, rule, partition_replicas,
                                         seed + 1, backend)
        c_theory = theoretical_constant(table, lam, graph.n, graph.m, alpha)
    return TailEstimate(
        survival_points=[(float(a), float(b)) for a, b in zip(x, p)],
        hill_alpha=float(alpha_hat),
        hill_k=k,
        c_hat_empirical=plateau_constant(x, p, alpha, sizes.size),
        c_theoretical=float(c_theory),
        sample_count=int(ok.sum()),
        partition=table,
        failed_replicas=int((~ok).sum()),
    )


def big_jump_fraction(sample, top_fraction=1e-3, ratio=0.1):
    """Share of the top failure sizes whose non-max demands sum below ratio * max."""
    ok = sample.status == 0
    s = sample.sizes[ok]
    count = max(1, int(round(top_fraction * s.shape[0])))
    idx = np.argsort(s, kind="stable")[-count:]
    rest = sample.rest_demand[ok][idx]
    top = sample.max_demand[ok][idx]
    return float(np.mean(rest < ratio * top))


# ---------------------------------------------------------------------------
# Tie-break invariance sweep
# ---------------------------------------------------------------------------

@dataclass
class InvarianceReport:
    instances: int = 0
    stabilized: int = 0
    agreeing: int = 0
    no_stabilization: int = 0
    instances_with_ties: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def agreement_rate(self):
        return self.agreeing / self.stabilized if self.stabilized else 1.0

    def to_json(self):
        return {
            "instances": self.instances,
            "stabilized": self.stabilized,
            "agreeing": self.agreeing,
            "no_stabilization": self.no_stabilization,
            "instances_with_rule_dependent_sequences": self.instances_with_ties,
            "agreement_rate": self.agreement_rate,
            "counterexamples": self.counterexamples,
        }


def _counterexample(graph, gamma, i, l, lam, lam_star, outcomes):
    graph1, _ = relabel_first(graph, i)
    gamma1 = np.asarray(gamma)[max_first_order(graph.n, i)]
    record = {
        "graph": graph.to_json(), "gamma": list(map(float, gamma)), "max_node": i, "first_edge": l,
        "rules": {},
    }
    for rule, out in outcomes.items():
        op = operating_point(graph1, gamma1, out.epsilon, lam, lam_star)
        trace = run_cascade(op.graph, op.demand, op.solution.generation, op.limits, l, rule)
        record["rules"][rule] = {
            "epsilon": out.epsilon, "z": out.z, "steps": [list(s) for s in out.steps],
            "end_partition": sorted(sorted(c) for c in out.end_partition),
            "trace": trace.to_json(),
        }
    return record


def tie_break_invariance_experiment(graphs, alpha, lam, lam_star, rules, gammas_per_graph, seed,
                                    backend=None, progress=None):
    """Compare end-of-cascade partitions across tie-break rules.

    For every graph, ``gammas_per_graph`` ratio vectors are drawn; each is
    tried with every max node i and first edge l, under every rule.
    """
    rules = [TieBreakRule.parse(r).value for r in rules]
    if len(rules) < 2:
        raise ValueError("need at least two rules to compare")
    report = InvarianceReport()
    for gi, graph in enumerate(graphs):
        rng = _replica_rng(seed, gi)
        for _ in range(gammas_per_graph):
            gamma1 = random_gamma(rng, graph.n, alpha)
            for i in range(1, graph.n + 1):
                gamma = gamma_to_original(gamma1, i)
                cache = {}
                for l in graph.edge_ids():
                    report.instances += 1
                    outcomes = {}
                    try:
                        for rule in rules:
                            outcomes[rule] = stabilize_epsilon(graph, gamma, i, l, rule, lam, lam_star,
                                                               cache=cache, backend=backend)
                    except (NoStabilization, NumericalFailure):
                        report.no_stabilization += 1
                        continue
                    report.stabilized += 1
                    if len({o.steps for o in outcomes.values()}) > 1:
                        report.instances_with_ties += 1
                    if len({o.end_partition for o in outcomes.values()}) == 1:
                        report.agreeing += 1
                    else:
                        report.counterexamples.append(
                            _counterexample(graph, gamma, i, l, lam, lam_star, outcomes))
        if progress is not None:
            progress(gi + 1, len(graphs), report)
    return report


def connected_graphs(max_nodes, min_nodes=2):
    """All connected simple graphs up to isomorphism with min..max nodes (max 7)."""
    import networkx as nx
    from .graph_core import build_graph
    if max_nodes > 7:
        raise ValueError("the graph atlas covers at most 7 nodes")
    out = []
    for h in nx.graph_atlas_g():
        n = h.number_of_nodes()
        if n < min_nodes or n > max_nodes or h.number_of_edges() == 0 or not nx.is_connected(h):
            continue
        out.append(build_graph(n, [(u + 1, v + 1) for u, v in h.edges()]))
    return out


def random_connected_graph(rng, n, extra_edge_prob=0.4):
    """Random spanning tree on n nodes plus each remaining pair with the given probability."""
    from .graph_core import build_graph
    nodes = rng.permutation(n) + 1
    edges = set()
    for pos in range(1, n):
        u, v = int(nodes[pos]), int(nodes[rng.integers(0, pos)])
        edges.add((min(u, v), max(u, v)))
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if (u, v) not in edges and rng.random() < extra_edge_prob:
                edges.add((u, v))
    return build_graph(n, sorted(edges))
