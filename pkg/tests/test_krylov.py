import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from ballschwarz import assemble_rhs, build_grid
from ballschwarz import krylov
from ballschwarz.diagnostics import smallest_eigenvalue
from ballschwarz.schwarz import additive_operator, SubdomainSolverSet


def test_cg_identity_one_step():
    b = np.random.default_rng(0).standard_normal(50)
    x, rep = krylov.cg(sp.identity(50), b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b)


def test_cg_finite_termination():
    A = sp.diags(np.arange(1.0, 101.0))
    b = np.random.default_rng(1).standard_normal(100)
    x, rep = krylov.cg(A, b, tol=1e-10, max_iters=200)
    assert rep.converged and rep.iterations <= 100
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_cg_condition_estimate():
    A = sp.diags(np.arange(1.0, 101.0))
    _, rep = krylov.cg(A, np.ones(100), tol=1e-12, max_iters=200)
    assert rep.cond_estimate == pytest.approx(100, rel=0.05)


def test_cg_detects_indefinite():
    A = sp.diags([1.0, -1.0, 2.0])
    with pytest.raises(krylov.IndefiniteError):
        krylov.cg(A, np.array([0.0, 1.0, 0.0]))


def test_cg_a_norm_error_decreases():
    rng = np.random.default_rng(2)
    Q = np.linalg.qr(rng.standard_normal((40, 40)))[0]
    A = Q @ np.diag(np.linspace(1, 50, 40)) @ Q.T
    x_true = rng.standard_normal(40)
    errs = []

    def cb(x):
        e = x - x_true
        errs.append(e @ A @ e)

    krylov.cg(A, A @ x_true, tol=1e-12, max_iters=100, callback=cb)
    assert np.all(np.diff(errs) <= 1e-12 * errs[0])


def test_additive_preconditioner_beats_plain_cg(cluster7):
    g = build_grid(cluster7, 0.25)
    b = assemble_rhs(g)
    solvers = SubdomainSolverSet.build(g, cluster7)
    _, plain = krylov.cg(g.laplacian, b, tol=1e-8, max_iters=2000)
    _, pre = krylov.cg(g.laplacian, b, M=additive_operator(solvers), tol=1e-8)
    assert pre.iterations < plain.iterations


def test_gmres_identity_and_monotone_residuals():
    b = np.ones(30)
    _, rep = krylov.gmres(sp.identity(30), b)
    assert rep.iterations == 1
    rng = np.random.default_rng(3)
    A = sp.random(80, 80, density=0.1, random_state=4) + 10 * sp.identity(80)
    x, rep = krylov.gmres(A, rng.standard_normal(80), tol=1e-10)
    assert rep.converged
    assert np.all(np.diff(rep.residuals) <= 1e-12 * rep.residuals[0])


def test_gmres_matches_cg_on_spd():
    A = sp.diags([-1, 2.5, -1], [-1, 0, 1], shape=(60, 60))
    b = np.random.default_rng(5).standard_normal(60)
    x1, _ = krylov.cg(A, b, tol=1e-10)
    x2, _ = krylov.gmres(A, b, tol=1e-10)
    # both stop on a 1e-10 residual; the condition number here is below 10
    assert np.linalg.norm(x1 - x2) <= 10 * 1e-10 * 10 * np.linalg.norm(x1)


def test_gmres_reports_stagnation():
    # the zero preconditioner makes every Krylov direction vanish
    zero = LinearOperator((5, 5), matvec=lambda v: np.zeros(5), dtype=float)
    _, rep = krylov.gmres(sp.identity(5), np.ones(5), M_right=zero, max_iters=50)
    assert not rep.converged
    assert rep.breakdown is not None


def test_lanczos_known_spectrum():
    lo, hi = krylov.lanczos_extremes(sp.diags(np.arange(1.0, 11.0)), iters=10)
    assert lo == pytest.approx(1, abs=1e-6)
    assert hi == pytest.approx(10, abs=1e-6)


def test_lanczos_ritz_values_in_field_of_values():
    A = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(200, 200))
    lo, hi = krylov.lanczos_extremes(A, iters=40)
    assert lo >= -1e-10 and hi <= 4 + 1e-10


def test_operator_linearity():
    A = sp.random(30, 30, density=0.2, random_state=1)
    op = krylov.as_operator(A)
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal((2, 30))
    np.testing.assert_allclose(op.matvec(2 * x - 3 * y), 2 * op.matvec(x) - 3 * op.matvec(y), atol=1e-10)
    with pytest.raises(TypeError):
        krylov.as_operator(lambda v: v)


def test_unit_ball_first_eigenvalue(single):
    lam = smallest_eigenvalue(build_grid(single, 1 / 24))
    assert lam == pytest.approx(np.pi ** 2, rel=0.05)
