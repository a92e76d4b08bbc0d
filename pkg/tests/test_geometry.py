import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cdist

from ballschwarz import BallUnion, GeometryError, chain, check_assumptions, lattice, load_xyzr, save_xyzr
from ballschwarz.geometry import (
    boundary_distance, fibonacci_sphere, sphere_intersection_circle, sphere_triple_points,
    union_boundary_cloud, union_boundary_distance,
)


def write(tmp_path, text):
    p = tmp_path / "g.xyzr"
    p.write_text(text)
    return p


def test_load_single_ball(tmp_path):
    u = load_xyzr(write(tmp_path, "0 0 0 1\n"))
    assert u.M == 1
    assert list(u.neighbors[0]) == [0]
    assert list(u.boundary) == [0] and len(u.interior) == 0


def test_load_two_balls_with_comments(tmp_path):
    u = load_xyzr(write(tmp_path, "# lens\n-1 0 0 2\n1 0 0 2  # right\n\n"))
    assert u.M == 2
    assert list(u.neighbors[0]) == [0, 1]
    assert len(u.interior) == 0


@pytest.mark.parametrize("text, msg", [
    ("0 0 0 -1\n", "nonpositive radius"),
    ("0 0 zero 1\n", ":1:3:"),
    ("0 0 1\n", "expected 4 numbers"),
    ("# nothing\n", "no balls"),
])
def test_load_errors(tmp_path, text, msg):
    with pytest.raises(GeometryError, match=msg):
        load_xyzr(write(tmp_path, text))


def test_save_load_roundtrip(tmp_path, cluster7):
    p = tmp_path / "c.xyzr"
    save_xyzr(cluster7, p)
    back = load_xyzr(p)
    np.testing.assert_array_equal(back.centers, cluster7.centers)
    np.testing.assert_array_equal(back.radii, cluster7.radii)


def test_separated_pair_not_neighbors():
    u = BallUnion.from_arrays([[0, 0, 0], [4.1, 0, 0]], [2, 2])
    assert list(u.neighbors[0]) == [0]


def test_chain_middle_neighbors():
    u = chain(5)
    assert list(u.neighbors[2]) == [1, 2, 3]


def test_tangent_balls_are_not_neighbors():
    u = BallUnion.from_arrays([[0, 0, 0], [2, 0, 0]], [1, 1])
    assert list(u.neighbors[0]) == [0]
    assert not check_assumptions(u).connected


def test_containment_violation_reported():
    u = BallUnion.from_arrays([[0, 0, 0], [1, 0, 0]], [3, 1])
    assert (1, 0) in check_assumptions(u).containment_violations


def test_lattice3_classification():
    u = lattice(3, 3, 3)
    assert list(u.interior) == [13]
    assert len(u.boundary) == 26
    assert len(u.interior_star) == 0


def test_chain_has_no_interior_balls():
    assert len(chain(8).interior) == 0


def test_two_ball_cone_margin(two_ball):
    # at y = (0, sqrt3, 0) both center directions make 60 degrees with the chord
    # plane; the best cone axis is the outward radial direction (0, 1, 0)
    y = np.array([0.0, math.sqrt(3), 0.0])
    v = (two_ball.centers - y) / np.linalg.norm(two_ball.centers - y, axis=1)[:, None]
    expected = float(np.min(-v @ np.array([0, 1.0, 0])))
    rep = check_assumptions(two_ball)
    assert expected == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert rep.gamma_alpha == pytest.approx(expected, abs=1e-8)
    assert rep.beta_min == pytest.approx(math.pi / 3, abs=1e-8)
    assert rep.ok


@pytest.mark.parametrize("r", [0.56, 0.75, 0.9, 0.98])
def test_generated_geometries_satisfy_assumptions(r):
    assert check_assumptions(lattice(2, 2, 2, r)).ok
    assert check_assumptions(chain(4, 1.0, r)).ok


def test_classification_stable_under_doubled_sampling(any_fixture):
    _, u, _ = any_fixture
    v = BallUnion.from_arrays(u.centers, u.radii, 2 * u.sphere_samples)
    np.testing.assert_array_equal(u.interior, v.interior)
    np.testing.assert_array_equal(u.interior_star, v.interior_star)


def test_adding_far_ball_keeps_classification(lattice3):
    # a ball overlapping only a corner cannot turn any other ball interior
    v = lattice3.with_ball([3.8, 3.8, 3.8], 0.9)
    assert set(v.interior) == set(lattice3.interior)


def test_fibonacci_sphere_unit_and_balanced():
    p = fibonacci_sphere(2000)
    np.testing.assert_allclose(np.linalg.norm(p, axis=1), 1, atol=1e-14)
    assert np.linalg.norm(p.mean(0)) < 1e-3


def test_intersection_circle_of_two_ball_fixture():
    center, axis, rho = sphere_intersection_circle(np.array([-1.0, 0, 0]), 2.0, np.array([1.0, 0, 0]), 2.0)
    np.testing.assert_allclose(center, 0, atol=1e-15)
    assert rho == pytest.approx(math.sqrt(3))
    assert abs(axis[0]) == pytest.approx(1)


def test_triple_points_lie_on_three_spheres():
    c = np.array([[0, 0, 0], [1.0, 0, 0], [0.5, 0.8, 0]])
    r = np.array([0.9, 0.9, 0.9])
    pts = sphere_triple_points(c, r)
    assert len(pts) == 2
    np.testing.assert_allclose(cdist(pts, c), np.tile(r, (2, 1)), atol=1e-12)


centers_st = st.lists(st.tuples(*[st.floats(-2, 2)] * 3), min_size=1, max_size=8)


@settings(max_examples=40, deadline=None)
@given(centers_st, st.floats(0.4, 1.5))
def test_neighbors_match_pairwise_rule_and_are_symmetric(cs, r):
    c = np.array(cs)
    u = BallUnion.from_arrays(c, np.full(len(c), r), sphere_samples=200)
    d = cdist(c, c)
    for i in range(u.M):
        brute = set(np.flatnonzero(2 * r - d[i] > 1e-12 * r))
        assert set(u.neighbors[i]) == brute | {i}
        for j in u.neighbors[i]:
            assert i in u.neighbors[j]


@settings(max_examples=30, deadline=None)
@given(centers_st, st.floats(0.6, 1.5))
def test_clean_pairs_are_not_nested(cs, r):
    c = np.array(cs)
    radii = r * (1 + 0.5 * (np.arange(len(c)) % 2))
    u = BallUnion.from_arrays(c, radii, sphere_samples=200)
    bad = set(check_assumptions(u, samples=16).containment_violations)
    d = cdist(c, c)
    for i in range(u.M):
        for j in range(u.M):
            if i != j and (i, j) not in bad:
                assert d[i, j] + radii[i] > radii[j]


def _cloud_distance(u, pts, n=60000):
    cloud, _, _ = union_boundary_cloud(u.centers, u.radii, n_sphere=n, n_circle=4000)
    return cdist(pts, cloud).min(1)


@pytest.mark.parametrize("name", ["two_ball", "chain5", "lattice2", "cluster7"])
def test_exact_boundary_distance_against_dense_cloud(name):
    from conftest import fixture_union
    u = fixture_union(name)
    rng = np.random.default_rng(3)
    lo, hi = u.bbox()
    X = lo + (hi - lo) * rng.random((4000, 3))
    X = X[u.contains(X)][:300]
    exact = boundary_distance(u, X)
    cloud = _cloud_distance(u, X)
    # the cloud is a subset of the boundary, so it can only overestimate
    assert np.all(cloud >= exact - 1e-12)
    assert np.max(cloud - exact) < 0.03 * u.r_max
    scalar = np.array([union_boundary_distance(u.centers, u.radii, x) for x in X[:60]])
    np.testing.assert_allclose(scalar, exact[:60], atol=1e-12)


def test_boundary_distance_single_ball():
    u = chain(1, r=1.0)
    X = np.array([[0, 0, 0], [0.3, 0.2, -0.1], [0.99, 0, 0]])
    np.testing.assert_allclose(boundary_distance(u, X), 1 - np.linalg.norm(X, axis=1), atol=1e-15)


def test_invalid_arrays_rejected():
    with pytest.raises(GeometryError):
        BallUnion.from_arrays(np.empty((0, 3)), [])
    with pytest.raises(GeometryError):
        BallUnion.from_arrays([[0, 0, 0]], [0.0])
    with pytest.raises(GeometryError):
        BallUnion.from_arrays([[0, 0, np.nan]], [1.0])
