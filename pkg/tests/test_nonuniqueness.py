import numpy as np
import pytest

from cascadia import reference as R
from cascadia.errors import Inapplicable
from cascadia.nonuniqueness import (TieQuery, analyze, build_tie_query, q_matrix, same_sign, skew_symmetry_check,
                                    soundness_experiment, tie_conditions, tie_residuals, uniform_projection)
from cascadia.scenarios import random_connected_graph, random_gamma

PREFIX = (7, 10, 11)
GAMMA = np.array(R.GAMMA)


def example_query(j, k):
    return build_tie_query(R.graph(), GAMMA, R.LAM, PREFIX, j, k, R.EPSILON, R.LAM_STAR)


def test_example_q_matrix_is_scaled_commutator():
    q = example_query(5, 6)
    Q = q_matrix(q)
    v5, v6 = R.V_FULL[4], R.V_FULL[5]
    assert q.same_sign
    assert np.allclose(Q, 1.25 * (np.outer(v5, v6) - np.outer(v6, v5)), atol=1e-14)
    assert np.allclose(Q, -Q.T, atol=1e-14)
    assert np.abs(Q @ np.ones(6)).max() <= 1e-14


@pytest.mark.parametrize("pair", [(5, 6), (5, 9), (6, 9)])
def test_example_tied_pairs_are_skew(pair):
    q = example_query(*pair)
    Q = q_matrix(q)
    a = uniform_projection(6, R.LAM)
    assert np.allclose(q.a_matrix, a, atol=1e-12)
    # Q (A - I) = -lam Q because e is in the kernel of Q
    assert np.allclose(Q @ (a - np.eye(6)), -R.LAM * Q, atol=1e-14)
    assert skew_symmetry_check(Q, q.a_matrix)
    assert tie_conditions(Q, q.a_matrix, GAMMA).all


def test_same_edge_gives_zero_q():
    q = example_query(5, 5)
    assert np.all(q_matrix(q) == 0)
    assert tie_conditions(np.zeros((6, 6)), np.eye(6), GAMMA).all


def test_untied_pair_after_first_failure():
    q = build_tie_query(R.graph(), GAMMA, R.LAM, (7,), 1, 4, R.EPSILON, R.LAM_STAR)
    Q = q_matrix(q)
    assert not tie_conditions(Q, q.a_matrix, GAMMA).all
    # the constant coefficient alone separates 22/21 from 17/18
    assert abs(tie_residuals(Q, q.a_matrix, GAMMA)[0]) > 1e-3


def test_skew_check_rejects_symmetric():
    Q = np.array([[1.0, 2.0], [2.0, 3.0]])
    assert not skew_symmetry_check(Q, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        skew_symmetry_check(np.ones((2, 3)), np.eye(2))


@pytest.mark.parametrize("seed", range(10))
def test_skew_q_with_constant_kernel_and_uniform_projection(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 8))
    b = rng.normal(size=(n, n))
    p = np.eye(n) - np.ones((n, n)) / n
    Q = p @ (b - b.T) @ p  # skew with Q e = 0
    a = uniform_projection(n, 0.4)
    assert skew_symmetry_check(Q, a)
    # skew-symmetry implies all three conditions for any admissible gamma
    for _ in range(50):
        assert tie_conditions(Q, a, random_gamma(rng, n, 1.5)).all


def test_disconnected_prefix_is_inapplicable():
    with pytest.raises(Inapplicable):
        build_tie_query(R.graph(), GAMMA, R.LAM, (1, 5, 6, 7, 8), 2, 3, R.EPSILON, R.LAM_STAR)


def test_query_validates_shapes():
    with pytest.raises(ValueError):
        TieQuery(1, 2, np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(2), True, np.eye(3), np.array([0, .5, .5]))


def test_sign_dead_zone():
    assert same_sign(1e-14, -1.0)
    assert same_sign(-2.0, -1.0)
    assert not same_sign(2.0, -1.0)


def test_analyze_reports_everything():
    res = analyze(R.graph(), GAMMA, R.LAM, PREFIX, 6, 9, R.EPSILON, R.LAM_STAR)
    assert res["skew_symmetric"] and res["e_in_kernel_of_Q"] and all(res["conditions"])
    assert len(res["Q"]) == 6 and len(res["residuals"]) == 3


def test_predicted_ties_are_simulated_ties():
    rng = np.random.default_rng(2024)
    graphs = [random_connected_graph(rng, int(rng.integers(3, 7))) for _ in range(30)]
    rep = soundness_experiment(graphs, 1.5, 0.5, 0.5, seed=3)
    assert rep.pairs > 100
    # conditions that hold always show up as equal exceedances
    assert not [m for m in rep.mismatches if m["predicted"]]
