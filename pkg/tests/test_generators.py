import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ballschwarz import GeometryError, chain, lattice, parse_geometry


def test_lattice_column_is_chain():
    u = lattice(1, 1, 5)
    assert u.M == 5
    np.testing.assert_array_equal(u.centers[:, :2], 1)
    np.testing.assert_array_equal(u.centers[:, 2], np.arange(1, 6))


def test_lattice3_has_one_interior_ball():
    u = lattice(3, 3, 3)
    assert u.M == 27 and len(u.interior) == 1
    np.testing.assert_array_equal(u.centers[u.interior[0]], [2, 2, 2])


def test_trivial_sizes():
    assert lattice(1, 1, 1).M == 1
    assert chain(1, 1.0, 0.9).M == 1


def test_two_ball_chain_centers():
    u = chain(2, 2.0, 2.0)
    np.testing.assert_array_equal(u.centers, [[-1, 0, 0], [1, 0, 0]])
    np.testing.assert_array_equal(u.radii, [2, 2])


def test_disconnected_generators_rejected():
    with pytest.raises(GeometryError):
        lattice(2, 1, 1, 0.5)
    with pytest.raises(GeometryError):
        chain(3, 1.8, 0.9)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 12))
def test_counts(n, m):
    assert lattice(n, n, n).M == n ** 3
    assert chain(m).M == m
    assert len(chain(m).interior) == 0


def test_parse_geometry(tmp_path):
    assert parse_geometry("lattice:2,2,3").M == 12
    assert parse_geometry("lattice:2,2,3,0.7").r_max == 0.7
    assert parse_geometry("chain:4,1.2,0.8").M == 4
    p = tmp_path / "a.xyzr"
    p.write_text("0 0 0 1\n")
    assert parse_geometry(str(p)).M == 1
    for bad in ("lattice:2,2", "lattice:2.5,2,2", "chain:x", "chain:"):
        with pytest.raises(ValueError):
            parse_geometry(bad)
