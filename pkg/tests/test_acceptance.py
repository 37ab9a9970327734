"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line (collected in the terminal summary and
printed directly when run with -s or as a script) before asserting.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from cascadia import reference as R
from cascadia.cascade_engine import run_cascade
from cascadia.dcopf_solver import closed_form_generation, face_enumeration_oracle, make_problem, solve, verify_kkt
from cascadia.errors import NoStabilization
from cascadia.graph_core import build_graph, flip_edges, incidence_matrix, relabel_first
from cascadia.nonuniqueness import build_tie_query, q_matrix, skew_symmetry_check, soundness_experiment
from cascadia.power_flow import compute_ptdf
from cascadia.scenarios import (big_jump_fraction, cascade_at, connected_graphs,
                                gamma_to_original, monte_carlo_tail, operating_point, random_connected_graph,
                                random_gamma, simulate_failure_sizes, stabilize_epsilon,
                                tie_break_invariance_experiment)

from conftest import ACCEPTANCE_LINES
from helpers import oriented, random_problem

TWO = build_graph(2, [(1, 2)])
SEED = 1
ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"


def record(num, title, passed, detail, started, budget):
    took = time.perf_counter() - started
    ok = bool(passed) and took <= budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2} {title}: {detail} [{took:.1f}s of {budget}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_ptdf_golden():
    t = time.perf_counter()
    g = R.graph()
    e1 = np.abs(compute_ptdf(g).v - R.V_FULL).max()
    e4 = np.abs(compute_ptdf(g, [e for e in g.edge_ids() if e not in (7, 10, 11)]).v - R.V_AFTER_7_10_11).max()
    record(1, "PTDF golden match", max(e1, e4) <= 1e-9,
           f"max |dV| = {e1:.1e}, max |dV(4)| = {e4:.1e} (tol 1e-9)", t, 1)


def test_criterion_02_cascade_golden():
    t = time.perf_counter()
    op = operating_point(R.graph(), np.array(R.GAMMA), R.EPSILON, R.LAM, R.LAM_STAR)
    trace = run_cascade(op.graph, op.demand, op.solution.generation, op.limits, R.FIRST_EDGE, "break_all")
    order = tuple(trace.failure_order)
    tied = trace.steps[2].psi[[e - 1 for e in R.TIED_EDGES]]
    target = 5 * R.LAM / (4 * R.LAM_STAR)
    err = float(np.abs(tied - target).max())
    later = "; later steps " + ", ".join(str(list(s)) for s in order[4:]) if len(order) > 4 else ""
    record(2, "cascade golden match", order[:4] == R.ORDER_NORMAL and err <= 1e-6,
           f"steps 1-4 {[list(s) for s in order[:4]]}{later}; tied psi - 25/22 = {err:.1e} (tol 1e-6)", t, 1)


def test_criterion_03_closed_forms():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst_unit = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        g = random_connected_graph(rng, n)
        lam = float(rng.uniform(0.05, 0.95))
        d = np.zeros(n)
        d[0] = 1.0
        _, p = oriented(g, d)
        sol = solve(make_problem(p, d, lam))
        worst_unit = max(worst_unit, float(np.abs(sol.generation - ((1 - lam) * d + lam / n)).max()))
    worst_sorted, count = 0.0, 0
    while count < 50:
        n = int(rng.integers(2, 7))
        g = random_connected_graph(rng, n)
        d = rng.random(n) + 0.01
        g = flip_edges(g, [e for e, (a, b) in enumerate(g.edges, start=1) if d[b - 1] < d[a - 1]])
        p = compute_ptdf(g)
        if np.any(p.v @ d < 0):
            continue  # the program needs V d >= 0 in the same orientation
        lam = float(rng.uniform(0.05, 0.95))
        sol = solve(make_problem(p, d, lam))
        ref = closed_form_generation(d, lam, incidence_matrix(g))
        worst_sorted = max(worst_sorted, float(np.abs(sol.generation - ref).max()))
        count += 1
    record(3, "solver vs closed forms", worst_unit <= 1e-9 and worst_sorted <= 1e-8,
           f"unit demand max err {worst_unit:.1e} (tol 1e-9), C d >= 0 max err {worst_sorted:.1e} (tol 1e-8)", t, 10)


def test_criterion_04_solver_vs_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst, worst_kkt = 0.0, 0.0
    for _ in range(500):
        _, _, _, prob = random_problem(rng, n_max=4)
        sol = solve(prob)
        ref = face_enumeration_oracle(prob)
        worst = max(worst, float(np.abs(sol.generation - ref.generation).max()))
        worst_kkt = max(worst_kkt, verify_kkt(prob, sol).max_residual)
    record(4, "solver vs face enumeration", worst <= 1e-7 and worst_kkt <= 1e-7,
           f"500 instances, max |g - g_oracle| = {worst:.1e}, max KKT residual = {worst_kkt:.1e} (tol 1e-7)", t, 300)


def test_criterion_05_eps_independence():
    t = time.perf_counter()
    rng = np.random.default_rng(SEED)
    same, failures, total = 0, 0, 100
    for _ in range(total):
        g = random_connected_graph(rng, int(rng.integers(2, 7)))
        i = int(rng.integers(1, g.n + 1))
        l = int(rng.integers(1, g.m + 1))
        gamma1 = random_gamma(rng, g.n, 1.5)
        try:
            out = stabilize_epsilon(g, gamma_to_original(gamma1, i), i, l, "break_all")
        except NoStabilization:
            failures += 1
            continue
        op = operating_point(relabel_first(g, i)[0], gamma1, out.epsilon / 4, 0.5, 0.5)
        steps, _, _ = cascade_at(op, l, "break_all")
        same += steps == out.steps and op.active_set == out.active_set
    record(5, "eps-independence", same == total - failures and failures < 0.001 * total,
           f"{same}/{total - failures} identical at eps* and eps*/4, {failures} without stabilization", t, 300)


def test_criterion_06_tie_characterization():
    t = time.perf_counter()
    g = R.graph()
    skew = []
    for j, k in ((5, 6), (5, 9), (6, 9)):
        q = build_tie_query(g, np.array(R.GAMMA), R.LAM, (7, 10, 11), j, k, R.EPSILON, R.LAM_STAR)
        skew.append(skew_symmetry_check(q_matrix(q), q.a_matrix))
    rng = np.random.default_rng(SEED)
    graphs = [random_connected_graph(rng, int(rng.integers(3, 7))) for _ in range(200)]
    rep = soundness_experiment(graphs, 1.5, 0.5, 0.5, seed=SEED)
    detail = (f"skew on {{5,6,9}} pairs: {skew}; {rep.pairs} pairs on {rep.instances} graphs "
              f"({rep.skipped} skipped), predicted ties {rep.predicted_ties}, simulated ties "
              f"{rep.simulated_ties}, mismatches {len(rep.mismatches)} (tol 1e-8)")
    for mm in rep.mismatches:
        gaps = [abs(a - b) / max(a, b) for a, b in mm["psi"]]
        detail += f"; mismatch graph {mm['tag']} pair {mm['pair']} relative gaps " + \
                  ", ".join(f"{x:.1e}" for x in gaps)
    record(6, "tie characterization", all(skew) and not rep.mismatches, detail, t, 300)


def _hill(graph, name):
    est = monte_carlo_tail(graph, 1.5, 0.5, 0.5, "break_all", 100_000, SEED, hill_k=500, partition_replicas=0)
    return est.hill_alpha, f"{name} alpha_hat = {est.hill_alpha:.3f}"


def test_criterion_07_tail_exponent():
    t = time.perf_counter()
    a2, d2 = _hill(TWO, "two-node")
    a6, d6 = _hill(R.graph(), "six-node")
    record(7, "tail exponent", 1.35 <= a2 <= 1.65 and 1.35 <= a6 <= 1.65,
           f"{d2}, {d6} (band [1.35, 1.65], 1e5 replicas, k = 500)", t, 600)


def test_criterion_08_tail_constant():
    t = time.perf_counter()
    est = monte_carlo_tail(TWO, 1.5, 0.5, 0.5, "break_all", 1_000_000, SEED, partition_replicas=10_000)
    ratio = est.c_hat_empirical / est.c_theoretical
    record(8, "tail constant", 0.5 <= ratio <= 2.0,
           f"c_hat = {est.c_hat_empirical:.4f}, c_theory = {est.c_theoretical:.4f} (summed over both max nodes), "
           f"ratio {ratio:.3f}; against the single-key value 0.125 the ratio is "
           f"{est.c_hat_empirical / 0.125:.3f} (band [0.5, 2])", t, 1200)


def test_criterion_09_conjecture_sweep():
    t = time.perf_counter()
    graphs = connected_graphs(6)
    rep = tie_break_invariance_experiment(graphs, 1.5, 0.5, 0.5, ["break_all", "smallest_label", "largest_label"],
                                          20, SEED)
    ARTIFACTS.mkdir(exist_ok=True)
    (ARTIFACTS / "conjecture_report.json").write_text(json.dumps(rep.to_json(), indent=1, default=str))
    detail = (f"{len(graphs)} graphs, {rep.stabilized} stabilized instances ({rep.instances_with_ties} with "
              f"rule-dependent sequences), {len(rep.counterexamples)} counterexamples, "
              f"{rep.no_stabilization} without stabilization")
    for ce in rep.counterexamples:
        runs = "; ".join(f"{r} steps {[list(s) for s in o['steps']]} z {o['z']}" for r, o in ce["rules"].items())
        detail += f"; counterexample edges {ce['graph']['edges']} max node {ce['max_node']} " \
                  f"first edge {ce['first_edge']}: {runs}"
    record(9, "tie-break invariance sweep", rep.stabilized > 0 and rep.agreeing == rep.stabilized, detail, t, 3600)


def test_criterion_10_big_jump_dominance():
    t = time.perf_counter()
    sample = simulate_failure_sizes(R.graph(), 1.5, 0.5, 0.5, "break_all", 1_000_000, SEED)
    frac = big_jump_fraction(sample, top_fraction=1e-3, ratio=0.1)
    bad = int((sample.status != 0).sum())
    record(10, "big-jump dominance", frac >= 0.9,
           f"{frac:.3f} of the top 0.1% have rest < 0.1 max (need >= 0.9); {bad} replicas failed to solve", t, 1200)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
