import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascadia import reference as R
from cascadia.cascade_engine import (REL_TOL, TieBreakRule, balance_ratios, exceedances, restore_balance, run_cascade,
                                     select_failures, total_failure_size)
from cascadia.dcopf_solver import make_problem, solve
from cascadia.graph_core import ComponentPartition, connected_components
from cascadia.power_flow import LimitSet, NetworkState, compute_ptdf, planning_stage
from cascadia.scenarios import operating_point, random_connected_graph

from helpers import oriented


def example_trace(lam=R.LAM, lam_star=R.LAM_STAR, rule="break_all", eps=R.EPSILON, first=R.FIRST_EDGE):
    op = operating_point(R.graph(), np.array(R.GAMMA), eps, lam, lam_star)
    return run_cascade(op.graph, op.demand, op.solution.generation, op.limits, first, rule)


def test_example_failure_order():
    order = example_trace().failure_order
    assert tuple(order[:4]) == R.ORDER_NORMAL
    # nodes 2 and 6 still hang on edge 1, which is overloaded next
    assert order[4] == (1,)


def test_example_exceedances_follow_rational_limits():
    trace = example_trace()
    for step, vals in R.limiting_exceedances(R.LAM, R.LAM_STAR).items():
        psi = trace.steps[step - 1].psi
        for e, v in vals.items():
            assert psi[e - 1] == pytest.approx(v, abs=1e-3)


def test_example_tied_exceedance():
    psi = example_trace().steps[2].psi
    tied = [psi[e - 1] for e in R.TIED_EDGES]
    # edge 9 carries no flow under e1, so its flow and limit are both O(eps)
    # and solver rounding shows up at about 1e-10 relative
    assert max(tied) - min(tied) <= REL_TOL * max(tied)
    assert tied[0] == pytest.approx(25 / 22, abs=1e-6)


def test_example_high_emergency_stops_after_edge_10():
    trace = example_trace(lam_star=0.7)
    assert tuple(trace.failure_order) == R.ORDER_HIGH_EMERGENCY
    assert trace.failure_size == 0.0 and trace.disconnected_from_max == 0


@pytest.mark.parametrize("rule, tail", [
    ("smallest_label", [(5,), (9,), (6,), (1,)]),
    ("largest_label", [(9,), (5,), (6,), (1,)]),
])
def test_example_single_edge_rules(rule, tail):
    trace = example_trace(rule=rule)
    assert trace.failure_order == [(7,), (11,), (10,)] + tail
    assert trace.end_components.as_sets() == example_trace().end_components.as_sets()


def test_example_failure_size_follows_limit_law():
    trace = example_trace()
    z = trace.disconnected_from_max
    assert z == 2
    assert abs(trace.failure_size - R.LAM * z / 6) <= 10 * R.EPSILON
    assert total_failure_size(trace) == pytest.approx(trace.failure_size)


def test_two_node_split_loses_half_the_margin(two):
    eps = 1e-6
    d = np.array([1.0, eps])
    g, p = oriented(two, d)
    sol = solve(make_problem(p, d, 0.5))
    trace = run_cascade(g, d, sol.generation, planning_stage(p, d, 0.5), 1)
    assert len(trace.steps) == 1 and trace.disconnected_from_max == 1
    assert trace.failure_size == pytest.approx(0.25, abs=10 * eps)


def test_no_exceedance_means_one_step(six):
    d = np.ones(6)
    p = compute_ptdf(six)
    trace = run_cascade(six, d, d, planning_stage(p, d, 0.5), 3)
    assert len(trace.steps) == 1 and trace.failure_size == 0


def test_select_failures_rules_and_threshold():
    psi = np.array([1.2, np.nan, 1.2 * (1 + 1e-12), 1.1, 0.4])
    assert select_failures(psi) == (1, 3)
    assert select_failures(psi, "smallest_label") == (1,)
    assert select_failures(psi, TieBreakRule.LARGEST_LABEL) == (3,)
    assert select_failures(np.array([1.0, 1 + 1e-12, 0.2])) == ()
    assert select_failures(np.array([np.inf, 2.0, np.inf])) == (1, 3)
    assert select_failures(np.array([np.nan])) == ()
    with pytest.raises(ValueError, match="unknown tie-break rule"):
        TieBreakRule.parse("random")
    assert TieBreakRule.parse("smallest-label") is TieBreakRule.SMALLEST_LABEL


def test_exceedances_with_zero_capacity():
    state = NetworkState(np.ones(2), np.ones(2), (1, 2, 3), np.array([0.5, 1e-15, 0.1]))
    lim = LimitSet(np.zeros(3), np.array([1.0, 0.0, 0.0]), 0.5, 0.5)
    assert list(exceedances(state, lim)) == [0.5, 0.0, np.inf]


def test_restore_balance_degenerate_components():
    parts = ComponentPartition({1: 1, 2: 2, 3: 3}, 3)
    st_ = NetworkState(np.array([2.0, 0.0, 1.0]), np.array([0.0, 3.0, 2.0]), (), None)
    post = restore_balance(st_, parts)
    assert list(post.demand) == [0.0, 0.0, 1.0]
    assert list(post.generation) == [0.0, 0.0, 1.0]
    theta = balance_ratios(st_, parts)
    assert theta == {1: float("inf"), 2: 0.0, 3: 0.5}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.sampled_from(list(TieBreakRule)))
def test_cascade_invariants(seed, n, rule):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n)
    d = (1 - rng.random(n)) ** (-1 / 1.5)
    go, p = oriented(g, d)
    sol = solve(make_problem(p, d, 0.5))
    l = int(rng.integers(1, g.m + 1))
    trace = run_cascade(go, d, sol.generation, planning_stage(p, d, 0.5, 0.5), l, rule)
    assert len(trace.steps) <= g.m
    prev = d
    failed = set()
    for s in trace.steps:
        assert np.all(s.state.demand <= prev + 1e-12)
        prev = s.state.demand
        failed |= set(s.failed_edges)
        parts = connected_components(go, [e for e in go.edge_ids() if e not in failed])
        labels = parts.labels(n)
        for c in range(1, parts.component_count + 1):
            sd = s.state.demand[labels == c].sum()
            sg = s.state.generation[labels == c].sum()
            assert abs(sd - sg) <= 1e-9 * max(sd, 1e-300) + 1e-15
    if rule is not TieBreakRule.BREAK_ALL:
        assert all(len(s.failed_edges) == 1 for s in trace.steps)
    assert trace.failure_size >= -1e-12
    if trace.end_components.component_count == 1:
        assert abs(trace.failure_size) <= 1e-12


def test_trace_json_shape():
    js = example_trace().to_json()
    assert [s["failed_edges"] for s in js["steps"]] == [[7], [11], [10], [5, 6, 9], [1]]
    assert js["z"] == 2 and js["end_components"] == [[1, 3, 4, 5], [2, 6]]
