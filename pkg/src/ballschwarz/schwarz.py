"""Overlapping Schwarz methods with exact subdomain solves and an optional PU coarse space."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, splu

from . import krylov
from .geometry import BallUnion, inside_ball
from .grid import GridDomain, all_subdomain_dofs
from .pou import delta_total, theta_column

METHODS = ("ms", "ms+coarse", "pcg-as", "pcg-as+coarse", "gmres-ms", "gmres-ms+coarse")


class CoarseSpaceError(ValueError):
    pass


@dataclass(eq=False)
class SubdomainSolverSet:
    """Per-ball DOF lists with LU factors of the principal submatrices A_ii.

    ``halo[i]`` lists the rows touched by columns ``dofs[i]`` of A and
    ``coupling[i]`` is A[halo_i, dofs_i], used to update a residual after a
    local correction without a global matrix-vector product.
    """

    A: sp.csr_matrix
    dofs: list
    factors: list = field(repr=False)
    halo: list = field(repr=False)
    coupling: list = field(repr=False)

    @classmethod
    def build(cls, grid: GridDomain, union: BallUnion, dofs=None) -> "SubdomainSolverSet":
        A = grid.laplacian
        if dofs is None:
            dofs = all_subdomain_dofs(grid, union)
        Acsc = A.tocsc()
        factors, halo, coupling = [], [], []
        for d in dofs:
            Aii = A[d][:, d].tocsc()
            factors.append(splu(Aii, permc_spec="MMD_AT_PLUS_A"))
            cols = Acsc[:, d]
            rows = np.unique(cols.indices)
            halo.append(rows)
            coupling.append(cols[rows].tocsr())
        return cls(A, dofs, factors, halo, coupling)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def local_solve(self, i: int, r_local: np.ndarray) -> np.ndarray:
        return self.factors[i].solve(r_local)

    def probe_residual(self, i: int, seed: int = 0) -> float:
        d = self.dofs[i]
        b = np.random.default_rng(seed).standard_normal(len(d))
        x = self.local_solve(i, b)
        return float(np.linalg.norm(self.A[d][:, d] @ x - b) / np.linalg.norm(b))


@dataclass(eq=False)
class CoarseSpace:
    """Span of theta_i (i interior) at the DOFs, with its Galerkin operator."""

    indices: np.ndarray
    basis: sp.csc_matrix = field(repr=False)
    operator: np.ndarray = field(repr=False)
    A_basis: sp.csc_matrix = field(repr=False)
    chol: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.indices)

    def solve(self, r: np.ndarray) -> np.ndarray:
        """Coefficients c with (Phi^T A Phi) c = Phi^T r."""
        return la.cho_solve(self.chol, self.basis.T @ r)

    def correction(self, r: np.ndarray) -> np.ndarray:
        return self.basis @ self.solve(r)

    def q0(self, grid: GridDomain, union: BallUnion, v: np.ndarray, dofs) -> np.ndarray:
        """Q_0 v = sum over interior i of (mean of v over ball i) theta_i, DOF-averaged means."""
        coef = np.array([v[dofs[i]].mean() for i in self.indices])
        return self.basis @ coef


def build_coarse_space(grid: GridDomain, union: BallUnion) -> CoarseSpace:
    idx = union.interior
    if len(idx) == 0:
        raise CoarseSpaceError(
            "no interior balls: the coarse space is empty; use the method without coarse space")
    X = grid.node_coords
    delta = delta_total(union, X)
    rows, cols, vals = [], [], []
    for k, i in enumerate(idx):
        sup = np.flatnonzero(inside_ball(X, union.centers[i], union.radii[i]))
        col = theta_column(union, i, X[sup], delta[sup])
        rows.append(sup)
        cols.append(np.full(len(sup), k))
        vals.append(col)
    Phi = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(grid.n_dofs, len(idx)))
    APhi = (grid.laplacian @ Phi).tocsc()
    A0 = (Phi.T @ APhi).toarray()
    A0 = 0.5 * (A0 + A0.T)
    chol = la.cho_factor(A0)
    return CoarseSpace(np.asarray(idx), Phi, A0, APhi, chol)


def multiplicative_sweep(u, rhs, solvers: SubdomainSolverSet, coarse: CoarseSpace | None = None,
                         residual=None, energy_trace=None):
    """One pass u <- u + R_i^T A_ii^-1 R_i (b - A u) over i = (0,) 1..M in index order.

    The coarse correction, when present, comes first. ``residual`` may carry
    b - A u to skip the initial product; ``energy_trace`` (a list) receives the
    energy 1/2 u^T A u - b^T u after every substep. Returns (u, residual).
    """
    u = np.array(u, float)
    r = rhs - solvers.A @ u if residual is None else np.array(residual, float)
    if energy_trace is not None:
        energy_trace.append(_energy(solvers.A, u, rhs))
    if coarse is not None:
        c = coarse.solve(r)
        u += coarse.basis @ c
        r -= coarse.A_basis @ c
        if energy_trace is not None:
            energy_trace.append(_energy(solvers.A, u, rhs))
    for i, d in enumerate(solvers.dofs):
        e = solvers.factors[i].solve(r[d])
        u[d] += e
        r[solvers.halo[i]] -= solvers.coupling[i] @ e
        if energy_trace is not None:
            energy_trace.append(_energy(solvers.A, u, rhs))
    return u, r


def _energy(A, u, b):
    return 0.5 * float(u @ (A @ u)) - float(b @ u)


def additive_apply(r, solvers: SubdomainSolverSet, coarse: CoarseSpace | None = None) -> np.ndarray:
    """sum_i R_i^T A_ii^-1 R_i r (+ coarse term); reduction in index order."""
    r = np.asarray(r, float)
    out = np.zeros_like(r)
    for i, d in enumerate(solvers.dofs):
        out[d] += solvers.factors[i].solve(r[d])
    if coarse is not None:
        out += coarse.correction(r)
    return out


def additive_operator(solvers, coarse=None) -> LinearOperator:
    n = solvers.n
    return LinearOperator((n, n), matvec=lambda r: additive_apply(r, solvers, coarse), dtype=float)


def multiplicative_operator(solvers, coarse=None) -> LinearOperator:
    """r -> one sweep from a zero initial guess with right-hand side r."""
    n = solvers.n

    def mv(r):
        r = np.asarray(r, float).ravel()
        return multiplicative_sweep(np.zeros(n), r, solvers, coarse, residual=r)[0]

    return LinearOperator((n, n), matvec=mv, dtype=float)


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual_history: list
    energy_history: list
    converged: bool
    wall_time: float
    coarse_dim: int = 0
    breakdown: str | None = None
    solution: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SchwarzConfig:
    method: str = "gmres-ms"
    tol: float = 1e-8
    max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")


def setup(grid: GridDomain, union: BallUnion, with_coarse: bool):
    """Subdomain solvers plus coarse space (None when absent or I_int is empty)."""
    solvers = SubdomainSolverSet.build(grid, union)
    coarse = None
    if with_coarse and len(union.interior):
        coarse = build_coarse_space(grid, union)
    return solvers, coarse


def solve(grid: GridDomain, union: BallUnion, rhs, config: SchwarzConfig | None = None,
          solvers=None, coarse=None, exact=None, **kw) -> SolveReport:
    """Solve A u = rhs with the selected Schwarz variant.

    With ``+coarse`` methods and no interior balls the coarse space is empty and
    the plain variant runs (``coarse_dim`` = 0 in the report). ``exact`` (the
    discrete solution, if known) turns ``energy_history`` into A-norm errors.
    """
    cfg = config or SchwarzConfig(**kw)
    t0 = time.perf_counter()
    with_coarse = cfg.method.endswith("+coarse")
    if solvers is None:
        solvers, coarse = setup(grid, union, with_coarse)
    elif not with_coarse:
        coarse = None
    A = solvers.A
    b = np.asarray(rhs, float)
    bnorm = np.linalg.norm(b)
    base = cfg.method.split("+")[0]

    def err_energy(u):
        if exact is not None:
            e = exact - u
            return float(np.sqrt(e @ (A @ e)))
        r = b - A @ u
        return float(np.sqrt(abs(r @ additive_apply(r, solvers))))

    energies = []
    breakdown = None
    if base == "ms":
        u = np.zeros_like(b)
        r = b.copy()
        hist = [np.linalg.norm(r)]
        energies.append(err_energy(u))
        it = 0
        converged = bnorm == 0 or hist[0] <= cfg.tol * bnorm
        while not converged and it < cfg.max_iters:
            u, r = multiplicative_sweep(u, b, solvers, coarse, residual=r)
            r = b - A @ u
            it += 1
            hist.append(np.linalg.norm(r))
            energies.append(err_energy(u))
            converged = hist[-1] <= cfg.tol * bnorm
    elif base == "pcg-as":
        energies.append(err_energy(np.zeros_like(b)))
        u, rep = krylov.cg(A, b, M=additive_operator(solvers, coarse), tol=cfg.tol,
                           max_iters=cfg.max_iters, callback=lambda x: energies.append(err_energy(x)))
        it, hist, converged = rep.iterations, rep.residuals, rep.converged
    else:
        u, rep = krylov.gmres(A, b, M_right=multiplicative_operator(solvers, coarse),
                              tol=cfg.tol, max_iters=cfg.max_iters)
        it, hist, converged, breakdown = rep.iterations, rep.residuals, rep.converged, rep.breakdown
        energies = [err_energy(np.zeros_like(b)), err_energy(u)]
    return SolveReport(cfg.method, it, [float(v) for v in hist], energies, bool(converged),
                       time.perf_counter() - t0, coarse.dim if coarse is not None else 0,
                       breakdown, u)


def estimate_contraction(solvers: SubdomainSolverSet, coarse: CoarseSpace | None = None,
                         sweeps: int = 20, seed: int = 0):
    """Empirical energy contraction of the multiplicative sweep.

    Runs sweeps on A e = 0 from a random start of unit A-norm and returns
    (rho, underflow_flag) with rho the geometric mean of the last five
    per-sweep ratios.
    """
    if sweeps < 10:
        raise ValueError("need at least 10 sweeps")
    A = solvers.A
    e = np.random.default_rng(seed).standard_normal(solvers.n)
    e /= np.sqrt(e @ (A @ e))
    zero = np.zeros(solvers.n)
    ratios = []
    for _ in range(sweeps):
        e, _ = multiplicative_sweep(e, zero, solvers, coarse)
        cur = float(np.sqrt(max(e @ (A @ e), 0.0)))
        if cur < 1e-14:
            return 0.0, True
        ratios.append(cur)
        e /= cur
    return float(np.exp(np.mean(np.log(ratios[-5:])))), False
