import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ballschwarz import chain
from ballschwarz.diagnostics import sample_union
from ballschwarz.indicators import n_0
from ballschwarz.pou import DomainError, delta_matrix, eval_delta, eval_theta, theta_and_grad, theta_energy_on_grid


def test_delta_at_lens_center(two_ball):
    di, d = eval_delta(two_ball, [0, 0, 0])
    np.testing.assert_allclose(di, [1, 1])
    assert d == 2


def test_delta_vanishes_on_boundary(two_ball):
    assert eval_delta(two_ball, [3, 0, 0])[1] == 0
    assert eval_delta(two_ball, [10, 0, 0])[1] == 0


def test_delta_at_chain_center_at_least_radius():
    u = chain(5)
    for i in range(5):
        assert eval_delta(u, u.centers[i])[1] >= 0.9


def test_theta_symmetric_midpoint(two_ball):
    v = eval_theta(two_ball, [0, 0.5, -0.3])
    np.testing.assert_allclose(v.theta, [0.5, 0.5], atol=1e-15)


def test_single_ball_theta_is_one(single):
    v = eval_theta(single, [0.2, -0.1, 0.4])
    np.testing.assert_array_equal(v.theta, [1.0])
    np.testing.assert_allclose(v.grad_theta, 0, atol=1e-15)


def test_theta_outside_is_domain_error(two_ball):
    with pytest.raises(DomainError):
        eval_theta(two_ball, [3, 0, 0])


def test_gradient_of_delta_at_center_is_zero(single):
    # the direction at the center is undefined; the convention is zero
    _, grad, _ = theta_and_grad(single, np.zeros((1, 3)))
    np.testing.assert_array_equal(grad, 0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["two_ball", "chain5", "lattice2", "cluster7"]), st.integers(0, 10_000))
def test_partition_of_unity_properties(name, seed):
    from conftest import fixture_union
    u = fixture_union(name)
    X = sample_union(u, 200, seed)
    theta, _, delta = theta_and_grad(u, X)
    np.testing.assert_allclose(theta.sum(1), 1, atol=1e-12)
    assert theta.min() >= 0 and theta.max() <= 1
    dm = delta_matrix(u, X)
    np.testing.assert_array_equal(theta == 0, dm == 0)
    np.testing.assert_allclose(dm.sum(1), delta, atol=1e-14)


def test_analytic_gradient_matches_central_differences(cluster7):
    X = sample_union(cluster7, 300, 7)
    _, grad, _ = theta_and_grad(cluster7, X)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (theta_and_grad(cluster7, X + e)[0] - theta_and_grad(cluster7, X - e)[0]) / (2 * h)
        dist = np.abs(np.linalg.norm(X[:, None] - cluster7.centers, axis=2) - cluster7.radii).min(1)
        away = dist > 1e-3
        np.testing.assert_allclose(fd[away], grad[away, :, k], atol=1e-5 * np.abs(grad).max())


def test_gradient_bounded_by_multiplicity_over_delta(any_fixture):
    _, u, _ = any_fixture
    X = sample_union(u, 2000, 1)
    _, grad, delta = theta_and_grad(u, X)
    bound = n_0(u) / delta
    assert np.all(np.linalg.norm(grad, axis=2).max(1) <= bound * (1 + 1e-12))


def test_theta_energy_single_ball_is_zero(single):
    for h in (0.4, 0.2):
        assert theta_energy_on_grid(single, 0, h) == 0


def test_theta_energy_rejects_bad_spacing(two_ball):
    with pytest.raises(ValueError):
        theta_energy_on_grid(two_ball, 0, 0.0)
