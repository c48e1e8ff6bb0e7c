import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netlqr import (NetworkSpec, PlantModel, RoutePath, SwitchedSystem, build_augmented,
                    expected_matrices, mode_distribution)
from netlqr.config import load_config
from netlqr.model import all_actions

from conftest import random_psd


def _spec(A, B, *paths):
    return NetworkSpec(PlantModel(A, B), tuple(RoutePath(d, p) for d, p in paths))


def test_two_path_dimensions():
    cfg = load_config("two-path")
    sys_, w, _ = cfg.dynamic_system()
    assert (sys_.n, sys_.u_dim) == (10, 2)
    dims = {name: cfg.schedule_system(name)[0].n for name in ("rho1", "rho2", "both")}
    assert dims == {"rho1": 5, "rho2": 9, "both": 10}


def test_one_slot_register_blocks():
    sys_ = build_augmented(_spec([[2.0]], [[1.0]], (1, 0.0)), [(1,)])
    assert sys_.n_modes == 1
    np.testing.assert_array_equal(sys_.A_modes[0], [[2.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(sys_.B_actions[0], [[0.0], [1.0]])
    assert sys_.probs[0] == 1.0


def test_paper_loss_pattern_pruning():
    spec = _spec(np.eye(4), np.ones((4, 1)), (1, 0.25), (5, 0.0))
    full = dict(mode_distribution(spec))
    assert full == {(0, 0): 0.0, (0, 1): 0.25, (1, 0): 0.0, (1, 1): 0.75}
    sys_ = build_augmented(spec)
    assert dict(zip(sys_.mode_labels, sys_.probs)) == {(0, 1): 0.25, (1, 1): 0.75}


def test_mode_distribution_simple_cases():
    assert dict(mode_distribution(_spec([[1.0]], [[1.0]], (2, 0.5)))) == {(0,): 0.5, (1,): 0.5}
    lossless = dict(mode_distribution(_spec([[1.0]], [[1.0]], (1, 0.0), (2, 0.0), (3, 0.0))))
    assert lossless[(1, 1, 1)] == 1.0
    assert sum(lossless.values()) == 1.0


@given(st.lists(st.floats(0, 1), min_size=1, max_size=4))
def test_mode_probabilities_sum_to_one(losses):
    spec = _spec([[1.0]], [[1.0]], *[(1, p) for p in losses])
    probs = [p for _, p in mode_distribution(spec)]
    assert len(probs) == 2 ** len(losses)
    assert abs(sum(probs) - 1.0) <= 1e-12
    sys_ = build_augmented(spec)
    assert abs(sys_.probs.sum() - 1.0) <= 1e-12
    assert np.all(sys_.probs > 0)


def test_register_block_does_not_depend_on_mode(rng):
    spec = _spec(rng.standard_normal((3, 3)), rng.standard_normal((3, 2)),
                 (2, 0.3), (3, 0.6), (1, 0.1))
    sys_ = build_augmented(spec)
    l = 3
    lower = sys_.A_modes[:, l:, l:]
    assert np.all(lower == lower[0])
    plant = sys_.A_modes[:, :l, :l]
    assert np.all(plant == plant[0])


def test_idle_action_has_zero_input_matrix(rng):
    spec = _spec(rng.standard_normal((2, 2)), rng.standard_normal((2, 1)), (1, 0.2), (4, 0.0))
    sys_ = build_augmented(spec)
    assert sys_.action_labels[0] == (0, 0)
    assert not np.any(sys_.B_actions[0])
    assert all_actions(2) == [(0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.mark.parametrize("d,m", [(1, 1), (3, 1), (4, 2), (6, 1)])
def test_shift_register_matches_delayed_recursion(d, m):
    rng = np.random.default_rng(d * 10 + m)
    l = 3
    AP = rng.standard_normal((l, l)) * 0.6
    BP = rng.standard_normal((l, m))
    sys_ = build_augmented(_spec(AP, BP, (d, 0.0)), [(1,)])
    T = 15
    u = rng.standard_normal((T, m))
    x_ref = np.zeros((T + 1, l))
    x_ref[0] = rng.standard_normal(l)
    for k in range(T):
        x_ref[k + 1] = AP @ x_ref[k] + (BP @ u[k - d] if k >= d else 0.0)
    x = np.zeros(sys_.n)
    x[:l] = x_ref[0]
    for k in range(T):
        x = sys_.A_modes[0] @ x + sys_.B_actions[0] @ u[k]
        np.testing.assert_allclose(x[:l], x_ref[k + 1], rtol=1e-12, atol=1e-12)


def test_expected_matrices_examples():
    sys_ = SwitchedSystem(np.array([[[0.0]], [[2.0]]]), [0.5, 0.5], np.ones((1, 1, 1)))
    Abar, Phi = expected_matrices(sys_, np.eye(1))
    assert Abar[0, 0] == 1.0 and Phi[0, 0] == 2.0
    _, Phi0 = expected_matrices(sys_, np.zeros((1, 1)))
    assert not np.any(Phi0)

    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4))
    P = random_psd(rng, 4)
    one = SwitchedSystem(A, [1.0], np.zeros((1, 4, 1)))
    Abar, Phi = expected_matrices(one, P)
    np.testing.assert_array_equal(Abar, A)
    np.testing.assert_allclose(Phi, A.T @ P @ A, rtol=1e-13, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 4))
def test_second_moment_dominates_squared_mean(seed, n, q):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(q))
    probs /= probs.sum()
    sys_ = SwitchedSystem(rng.standard_normal((q, n, n)), probs, np.zeros((1, n, 1)))
    P = random_psd(rng, n, rank=int(rng.integers(1, n + 1)))
    Abar, Phi = expected_matrices(sys_, P)
    assert np.allclose(Phi, Phi.T, rtol=0, atol=0)
    gap = Phi - Abar.T @ P @ Abar
    scale = max(1.0, np.abs(Phi).max())
    assert np.linalg.eigvalsh(0.5 * (gap + gap.T)).min() >= -1e-10 * scale


def test_invalid_inputs():
    with pytest.raises(ValueError):
        RoutePath(0, 0.1)
    with pytest.raises(ValueError):
        RoutePath(1, 1.5)
    with pytest.raises(ValueError):
        PlantModel([[1.0, 0.0]], [[1.0]])
    with pytest.raises(ValueError):
        build_augmented(_spec([[1.0]], [[1.0]], (1, 0.0)), [])
    with pytest.raises(ValueError):
        build_augmented(_spec([[1.0]], [[1.0]], (1, 0.0)), [(1, 0)])
    with pytest.raises(ValueError):
        SwitchedSystem(np.eye(2)[None], [0.7], np.zeros((1, 2, 1)))
    with pytest.raises(ValueError):
        expected_matrices(SwitchedSystem(np.eye(2)[None], [1.0], np.zeros((1, 2, 1))), np.eye(3))
