import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netlqr import (CostWeights, NumericalError, RoutingSchedule, SwitchedSystem,
                    exhaustive_expected_cost, expected_cost, expected_matrices, solve_static)

from conftest import random_pd, random_psd, random_switched, random_weights, textbook_lqr


def scalar_example(N=1):
    sys_ = SwitchedSystem(np.array([[[0.0]], [[2.0]]]), [0.5, 0.5], np.ones((1, 1, 1)))
    return sys_, CostWeights(np.eye(1), np.eye(1), np.eye(1), N)


def grid_one_step(x, A_modes, probs, grid):
    """Brute-force min over u of E[x^2 + u^2 + (A x + u)^2]."""
    costs = x * x + grid ** 2 + sum(p * (a * x + grid) ** 2 for a, p in zip(A_modes, probs))
    j = np.argmin(costs)
    return grid[j], costs[j]


def test_scalar_sign_oracle():
    sys_, w = scalar_example()
    g = solve_static(sys_, w, 0)
    assert g.K[0][0, 0] == pytest.approx(-0.5, abs=1e-14)
    assert g.P[0][0, 0] == pytest.approx(2.5, abs=1e-14)
    assert expected_cost(g, [1.0]) == pytest.approx(2.5, abs=1e-14)
    grid = np.arange(-5, 5, 1e-4)
    for x in (-2.0, -0.7, 0.3, 1.0, 3.0):
        u, c = grid_one_step(x, (0.0, 2.0), (0.5, 0.5), grid)
        assert u == pytest.approx(g.K[0][0, 0] * x, abs=1e-3)
        assert c == pytest.approx(g.P[0][0, 0] * x * x, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 3), st.integers(1, 50))
def test_single_mode_collapses_to_textbook_riccati(seed, n, m, N):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    B = rng.standard_normal((n, m))
    sys_ = SwitchedSystem(A, [1.0], B[None])
    M, R, Q = random_psd(rng, n), random_pd(rng, m), random_psd(rng, n)
    g = solve_static(sys_, CostWeights(M, R, Q, N), 0)
    K_ref, P_ref = textbook_lqr(A, B, M, R, Q, N)
    for k in range(N):
        assert np.linalg.norm(g.K[k] - K_ref[k]) <= 1e-10 * max(np.linalg.norm(K_ref[k]), 1e-300)
    for k in range(N + 1):
        assert np.linalg.norm(g.P[k] - P_ref[k]) <= 1e-10 * max(np.linalg.norm(P_ref[k]), 1e-300)


def test_no_authority_means_zero_gain(rng):
    sys_ = SwitchedSystem(rng.standard_normal((2, 3, 3)), [0.4, 0.6], np.zeros((1, 3, 2)))
    w = CostWeights(random_psd(rng, 3), random_pd(rng, 2), random_psd(rng, 3), 6)
    g = solve_static(sys_, w, 0)
    for k in range(w.N):
        assert not np.any(g.K[k])
        _, Phi = expected_matrices(sys_, g.P[k + 1])
        np.testing.assert_allclose(g.P[k], w.M + Phi, rtol=1e-14, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_more_authority_never_costs_more(seed):
    rng = np.random.default_rng(seed)
    n, m, q = 3, 3, 2
    B = rng.standard_normal((n, m))
    drop = B.copy()
    drop[:, rng.integers(0, m)] = 0.0
    sys_ = SwitchedSystem(rng.standard_normal((q, n, n)), [0.3, 0.7], np.stack([B, drop]))
    # zeroing a column only removes authority when inputs are not coupled through R
    R = np.diag(rng.uniform(0.1, 2.0, m))
    w = CostWeights(random_psd(rng, n), R, random_psd(rng, n), 1)
    Pa = solve_static(sys_, w, 0).P[0]
    Pb = solve_static(sys_, w, 1).P[0]
    assert np.linalg.eigvalsh(Pb - Pa).min() >= -1e-10 * max(1.0, np.abs(Pb).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_value_matrices_stay_psd_and_symmetric(seed, N):
    rng = np.random.default_rng(seed)
    sys_ = random_switched(rng, 3, 3, 2, m=2)
    w = random_weights(rng, sys_, N)
    g = solve_static(sys_, w, rng.integers(0, 2, N).tolist())
    assert np.array_equal(g.P[N], w.Q)
    for P in g.P:
        assert np.array_equal(P, P.T)
        assert np.linalg.eigvalsh(P).min() >= -1e-9 * max(1.0, np.abs(P).max())


@pytest.mark.parametrize("seed", range(6))
def test_scalar_static_matches_enumeration_and_beats_grid_perturbations(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 4))
    sys_ = random_switched(rng, 1, 2, 2)
    w = random_weights(rng, sys_, N)
    sched = rng.integers(0, 2, N).tolist()
    g = solve_static(sys_, w, sched)
    x0 = np.array([rng.uniform(0.5, 2.0)])
    best = expected_cost(g, x0)
    assert exhaustive_expected_cost(sys_, w, g, x0) == pytest.approx(best, rel=1e-12)

    h = 1e-3
    for deltas in itertools.product((-h, 0.0, h), repeat=N):
        K = tuple(Kk + d for Kk, d in zip(g.K, deltas))
        perturbed = type(g)(K, g.P, g.actions)
        assert exhaustive_expected_cost(sys_, w, perturbed, x0) >= best - 1e-12


def test_expected_cost_at_origin_is_zero(rng):
    sys_ = random_switched(rng, 4, 2, 2)
    g = solve_static(sys_, random_weights(rng, sys_, 5), 1)
    assert expected_cost(g, np.zeros(4)) == 0.0


def test_schedule_validation(rng):
    sys_ = random_switched(rng, 2, 2, 2)
    w = random_weights(rng, sys_, 3)
    with pytest.raises(ValueError):
        solve_static(sys_, w, [0, 1])
    with pytest.raises(ValueError):
        solve_static(sys_, w, RoutingSchedule((0, 2, 1)))
    with pytest.raises(ValueError):
        expected_cost(solve_static(sys_, w, 0), np.ones(3))
    bad = CostWeights(np.eye(3), np.eye(1), np.eye(3), 3)
    with pytest.raises(ValueError):
        solve_static(sys_, bad, 0)


def test_weight_validation():
    with pytest.raises(ValueError):
        CostWeights(np.eye(2), np.zeros((1, 1)), np.eye(2), 3)
    with pytest.raises(ValueError):
        CostWeights(np.eye(2), np.eye(1), np.eye(2), 0)
    with pytest.raises(ValueError):
        CostWeights(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(1), np.eye(2), 1)
    with pytest.raises(ValueError):
        CostWeights(-np.eye(2), np.eye(1), np.eye(2), 1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_is_reported_as_numerical_error():
    sys_ = SwitchedSystem(np.array([[[1e200]]]), [1.0], np.zeros((1, 1, 1)))
    w = CostWeights(np.eye(1), np.eye(1), np.eye(1), 3)
    with pytest.raises(NumericalError):
        solve_static(sys_, w, 0)
