"""Sampled verification of the partition of unity, overlap inequalities and solver bounds."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import indicators as ind
from . import krylov, schwarz
from .generators import lattice
from .geometry import BallUnion, boundary_distance
from .grid import GridDomain, assemble_rhs, build_grid
from .pou import delta_total, theta_and_grad

log = logging.getLogger(__name__)

SLACK = 0.05
SWEEP_COLUMNS = ("geometry", "M", "method", "h", "tol", "iterations", "rho", "d_F", "n_0", "n_max",
                 "s0_bound", "converged")


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    witness: np.ndarray | None = field(default=None, repr=False)
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: worst={self.worst:.6g} {self.detail}".rstrip()


@dataclass
class VerifyReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def sample_union(union: BallUnion, n: int, seed: int = 0) -> np.ndarray:
    """``n`` points uniform in the union (rejection from the bounding box)."""
    rng = np.random.default_rng(seed)
    lo, hi = union.bbox()
    out, have = [], 0
    while have < n:
        p = lo + (hi - lo) * rng.random((max(2 * (n - have), 256), 3))
        p = p[union.contains(p)]
        out.append(p)
        have += len(p)
    return np.vstack(out)[:n]


def _sphere_gap(union: BallUnion, pts) -> np.ndarray:
    d = cdist(pts, union.centers)
    return np.abs(d - union.radii).min(1)


def verify_pou(union: BallUnion, samples: int = 10_000, seed: int = 0, n_0: int | None = None,
               gamma_int: float | None = None, gamma_b: float | None = None) -> VerifyReport:
    """Sum, range, support, finite-difference gradient and the two gradient bounds.

    The gradient bounds need N_0, gamma_int and gamma_b; missing ones are computed.
    """
    X = sample_union(union, samples, seed)
    theta, grad, delta = theta_and_grad(union, X)
    checks = []

    err = np.abs(theta.sum(1) - 1)
    k = int(np.argmax(err))
    checks.append(Check("sum", bool(err[k] <= 1e-12), float(err[k]), X[k]))

    lo, hi = float(theta.min()), float(theta.max())
    checks.append(Check("range", lo >= 0 and hi <= 1, max(-lo, hi - 1, 0.0)))

    outside = cdist(X, union.centers) > union.radii
    leak = np.abs(np.where(outside, theta, 0.0)).max()
    checks.append(Check("support", bool(leak == 0), float(leak)))

    # central differences away from every sphere
    h = 1e-5 * union.r_min
    keep = np.flatnonzero(_sphere_gap(union, X) > 1e-2 * union.r_min)[:2000]
    worst, wit = 0.0, None
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        tp = theta_and_grad(union, X[keep] + e)[0]
        tm = theta_and_grad(union, X[keep] - e)[0]
        fd = (tp - tm) / (2 * h)
        an = grad[keep, :, j]
        scale = np.linalg.norm(grad[keep], axis=(1, 2))
        rel = np.abs(fd - an).max(1) / np.maximum(scale, 1e-8)
        rel = np.where(np.abs(fd - an).max(1) < 1e-9, 0.0, rel)
        if rel.size and rel.max() > worst:
            worst, wit = float(rel.max()), X[keep[int(np.argmax(rel))]]
    checks.append(Check("gradient_fd", worst <= 1e-4, worst, wit, f"({len(keep)} points)"))

    n0 = n_0 if n_0 is not None else ind.n_0(union)
    gnorm = np.linalg.norm(grad, axis=2)

    interior = union.interior
    if len(interior):
        gi = gamma_int if gamma_int is not None else ind.gamma_int(union)
        val = gnorm[:, interior].max(1) if len(interior) else np.zeros(len(X))
        ratio = val / (n0 / gi)
        k = int(np.argmax(ratio))
        checks.append(Check("pu2_interior_gradient", bool(ratio[k] <= 1 + SLACK), float(ratio[k]), X[k],
                            "ratio to N_0/gamma_int"))
    else:
        checks.append(Check("pu2_interior_gradient", True, 0.0, None, "vacuous: no interior balls"))

    gb = gamma_b if gamma_b is not None else ind.gamma_b(ind.beta_inf(union), union.r_min, union.r_max)
    dist = boundary_distance(union, X)
    val = gnorm[:, union.boundary].max(1)
    ratio = val * gb * dist / n0
    k = int(np.argmax(ratio))
    checks.append(Check("pu3_boundary_gradient", bool(ratio[k] <= 1 + SLACK), float(ratio[k]), X[k],
                        "ratio to N_0/(gamma_b dist)"))
    return VerifyReport(checks)


def calpha_check(union: BallUnion, i: int, alpha: float, samples: int = 10_000, seed: int = 0,
                 scale: float = 1.0, near_only: bool = True) -> Check:
    """delta_i(x) >= scale * cos(alpha)/2 * |x - y| for y on sphere i and x in the cone
    of half-angle alpha at y pointing at m_i, outside B(m_i, R_i sin alpha).

    The estimate follows from the near root of a cosine rule, so by default x is
    also restricted to the near component: the ball with diameter [y, m_i]. On
    the far side of ball i, delta_i -> 0 while |x - y| -> 2 R_i and the bound
    cannot hold; ``near_only=False`` samples there too.
    """
    rng = np.random.default_rng(seed)
    c, r = union.centers[i], union.radii[i]
    ca = scale * math.cos(alpha) / 2
    worst, wit, n = math.inf, None, 0
    while n < samples:
        y = rng.standard_normal(3)
        y = c + r * y / np.linalg.norm(y)
        v = (c - y) / r
        x = rng.standard_normal((4096, 3))
        x = c + r * (x / np.linalg.norm(x, axis=1)[:, None]) * rng.random(4096)[:, None] ** (1 / 3)
        w = x - y
        dw = np.linalg.norm(w, axis=1)
        dc = np.linalg.norm(x - c, axis=1)
        ok = (w @ v >= math.cos(alpha) * dw) & (dc > r * math.sin(alpha)) & (dc < r)
        if near_only:
            ok &= np.linalg.norm(x - 0.5 * (y + c), axis=1) <= r / 2
        if not ok.any():
            continue
        ratio = (r - dc[ok]) / (ca * dw[ok])
        k = int(np.argmin(ratio))
        if ratio[k] < worst:
            worst, wit = float(ratio[k]), x[ok][k]
        n += int(ok.sum())
    name = f"calpha_ball{i}" + ("" if near_only else "_full") + ("" if scale == 1 else f"_x{scale:g}")
    return Check(name, worst >= 1.0, worst, wit,
                 "ratio delta_i / (c_alpha dist)")


def verify_overlap_inequalities(union: BallUnion, samples: int = 10_000, seed: int = 0,
                                gamma_int: float | None = None, gamma_b: float | None = None,
                                beta: float | None = None, scale: float = 1.0) -> VerifyReport:
    """delta >= gamma_int on interior balls, delta >= gamma_b dist on boundary balls, and the
    c_alpha cone estimate on two-ball fixtures. ``scale`` multiplies every constant (negative
    controls use 10)."""
    beta = beta if beta is not None else ind.beta_inf(union)
    gi = gamma_int if gamma_int is not None else ind.gamma_int(union)
    gb = gamma_b if gamma_b is not None else ind.gamma_b(beta, union.r_min, union.r_max)
    X = sample_union(union, samples, seed)
    delta = delta_total(union, X)
    member = cdist(X, union.centers) < union.radii
    checks = []
    tag = "" if scale == 1 else f"_x{scale:g}"

    sel = member[:, union.interior].any(1) if len(union.interior) else np.zeros(len(X), bool)
    if sel.any():
        ratio = delta[sel] / (scale * gi)
        k = int(np.argmin(ratio))
        checks.append(Check("overlap_interior" + tag, bool(ratio[k] >= 1 - SLACK), float(ratio[k]),
                            X[sel][k], "ratio delta / gamma_int"))
    else:
        checks.append(Check("overlap_interior" + tag, True, math.inf, None, "vacuous: no interior balls"))

    sel = member[:, union.boundary].any(1)
    dist = boundary_distance(union, X[sel])
    ratio = delta[sel] / (scale * gb * dist)
    k = int(np.argmin(ratio))
    checks.append(Check("overlap_boundary" + tag, bool(ratio[k] >= 1 - SLACK), float(ratio[k]),
                        X[sel][k], "ratio delta / (gamma_b dist)"))

    if union.M == 2:
        alpha = math.pi / 2 - beta
        for i in range(2):
            checks.append(calpha_check(union, i, alpha, samples, seed, scale))
    return VerifyReport(checks)


def smallest_eigenvalue(grid: GridDomain, iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Smallest eigenvalue of the grid Laplacian by inverse iteration.

    Inner solves use CG to 1e-12; a sparse LU of a 3D Laplacian fills in badly.
    """
    A = grid.laplacian

    def solve(x):
        y, rep = krylov.cg(A, x, tol=1e-12, max_iters=20 * grid.n_dofs)
        if not rep.converged:
            raise ArithmeticError("inner CG solve did not converge")
        return y

    return krylov.inverse_power_min(solve, A.dot, grid.n_dofs, iters, tol, seed)


@dataclass
class EigenCheck:
    lambda_min: float
    lower_bound: float

    @property
    def slack(self) -> float:
        return self.lambda_min / self.lower_bound

    @property
    def passed(self) -> bool:
        return self.lambda_min >= self.lower_bound


def verify_eigen_bound(grid: GridDomain, d_f: float, seed: int = 0) -> EigenCheck:
    c_m, c_h = ind.hardy_constants()
    return EigenCheck(smallest_eigenvalue(grid, seed=seed), ind.eig_lower_bound(c_h, c_m, d_f))


def case_dims(case: int, n: int) -> tuple[int, int, int]:
    """Lattice dimensions of the three scaling experiments."""
    if case == 1:
        return 1, 1, n
    if case == 2:
        return 4, 4, n
    if case == 3:
        return n, n, n
    raise ValueError(f"unknown case {case}; expected 1, 2 or 3")


def loglog_slope(m, iterations) -> float:
    x = np.log(np.asarray(m, float))
    y = np.log(np.asarray(iterations, float))
    return float(np.polyfit(x, y, 1)[0])


def scaling_sweep(case: int, n_list, method: str = "gmres-ms", tol: float = 1e-8, h: float | None = None,
                  radius: float = 0.9, indicator_config: ind.IndicatorConfig | None = None,
                  with_indicators: bool = True, max_iters: int = 500, seed: int = 0) -> list[dict]:
    """One CSV row per n: iterations, measured contraction and the headline indicators."""
    rows = []
    for n in n_list:
        dims = case_dims(case, n)
        union = lattice(*dims, r=radius)
        hh = h or union.r_min / 6
        grid = build_grid(union, hh)
        coarse_wanted = method.endswith("+coarse")
        solvers, coarse = schwarz.setup(grid, union, coarse_wanted)
        rep = schwarz.solve(grid, union, assemble_rhs(grid), schwarz.SchwarzConfig(method, tol, max_iters, seed),
                            solvers=solvers, coarse=coarse)
        rho, _ = schwarz.estimate_contraction(solvers, coarse, seed=seed)
        row = {"geometry": "lattice:{},{},{},{:g}".format(*dims, radius), "M": union.M, "method": method,
               "h": hh, "tol": tol, "iterations": rep.iterations, "rho": rho,
               "d_F": math.nan, "n_0": -1, "n_max": ind.n_max(union), "s0_bound": math.nan,
               "converged": rep.converged}
        if with_indicators:
            r = ind.compute_indicators(union, indicator_config or ind.IndicatorConfig(h=hh, seed=seed))
            row.update(d_F=r.d_F, n_0=r.n_0, s0_bound=r.s0_bound)
        log.info("sweep case %d n=%d: %d iterations", case, n, rep.iterations)
        rows.append(row)
    return rows
