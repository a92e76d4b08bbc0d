import math

import numpy as np
import pytest

from ballschwarz import build_grid, chain
from ballschwarz import diagnostics as dg
from ballschwarz import indicators as ind


@pytest.mark.parametrize("name", ["single", "two_ball", "chain5", "lattice3"])
def test_pou_suite_passes(name):
    from conftest import fixture_union
    rep = dg.verify_pou(fixture_union(name), 4000, seed=2)
    assert rep.passed, rep.lines()


def test_pou_interior_check_vacuous_without_interior(two_ball):
    rep = dg.verify_pou(two_ball, 2000)
    assert "vacuous" in rep["pu2_interior_gradient"].detail
    assert rep["pu3_boundary_gradient"].passed


@pytest.mark.parametrize("name", ["single", "two_ball", "chain5", "lattice3"])
def test_overlap_inequalities_and_negative_controls(name):
    from conftest import fixture_union
    u = fixture_union(name)
    ok = dg.verify_overlap_inequalities(u, 4000, seed=1)
    assert ok.passed, ok.lines()
    bad = dg.verify_overlap_inequalities(u, 4000, seed=1, scale=10)
    for c in bad.checks:
        if "vacuous" not in c.detail:
            assert not c.passed, c.line()


def test_mixed_radii_boundary_constant_is_loose(cluster7):
    # gamma_b carries the factor r_min / r_max = 1/2, so on this fixture the
    # boundary estimate holds with more than a tenfold margin; the check still
    # fails as soon as the constant exceeds the measured margin
    ok = dg.verify_overlap_inequalities(cluster7, 4000, seed=1)
    assert ok.passed
    margin = ok["overlap_boundary"].worst
    assert margin > 10
    tight = dg.verify_overlap_inequalities(cluster7, 4000, seed=1, scale=1.1 * margin / (1 - dg.SLACK))
    assert not tight.passed


def test_single_ball_overlap_ratio_is_two(single):
    # delta = dist to the sphere and gamma_b = 1/2, so the ratio is exactly 2
    rep = dg.verify_overlap_inequalities(single, 2000)
    assert rep["overlap_boundary"].worst == pytest.approx(2.0, rel=1e-9)


def test_cone_estimate_near_component(two_ball):
    alpha = math.pi / 2 - ind.beta_inf(two_ball)
    assert dg.calpha_check(two_ball, 0, alpha, 4000).passed
    assert not dg.calpha_check(two_ball, 0, alpha, 4000, scale=10).passed


def test_cone_estimate_fails_on_far_side(two_ball):
    # the literal cone region reaches the far side of the ball, where delta_i -> 0
    alpha = math.pi / 2 - ind.beta_inf(two_ball)
    assert not dg.calpha_check(two_ball, 0, alpha, 4000, near_only=False).passed


def test_eigen_bound_single_ball(single):
    chk = dg.verify_eigen_bound(build_grid(single, 1 / 12), 8.0)
    assert chk.passed
    assert chk.lower_bound == pytest.approx(1 / (8 * np.prod(ind.hardy_constants())))
    assert chk.slack > 1e5


def test_reports_are_deterministic(two_ball):
    a = dg.verify_pou(two_ball, 1000, seed=5).lines()
    b = dg.verify_pou(two_ball, 1000, seed=5).lines()
    assert a == b


def test_sample_union_inside(cluster7):
    X = dg.sample_union(cluster7, 500, 3)
    assert X.shape == (500, 3) and cluster7.contains(X).all()


def test_case_dims_and_slope():
    assert dg.case_dims(1, 4) == (1, 1, 4)
    assert dg.case_dims(2, 4) == (4, 4, 4)
    assert dg.case_dims(3, 4) == (4, 4, 4)
    with pytest.raises(ValueError):
        dg.case_dims(4, 2)
    m = np.array([8, 27, 64])
    assert dg.loglog_slope(m, 3 * m ** (1 / 3)) == pytest.approx(1 / 3)


def test_scaling_sweep_rows():
    rows = dg.scaling_sweep(1, [2, 3], with_indicators=False)
    assert [r["M"] for r in rows] == [2, 3]
    for r in rows:
        assert set(r) == set(dg.SWEEP_COLUMNS)
        assert r["converged"] and 0 <= r["rho"] < 1
        assert r["geometry"].startswith("lattice:1,1,")
