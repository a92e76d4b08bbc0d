"""Local geometry indicators, the global fatness indicator d_F and derived bound constants.

Sampled quantities (N_0, gamma_int, gamma_f, d_vdw, d_SES) are estimates; the
sampling budgets live in ``IndicatorConfig`` so every run is reproducible.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .geometry import (BallUnion, GeometryError, check_assumptions, circle_points, fibonacci_sphere,
                       inside_ball, sphere_intersection_circle, sphere_triple_points,
                       union_boundary_cloud)
from .grid import grid_nodes

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-1, 1, 16))
DEFAULT_MC_SAMPLES = 100_000
DEFAULT_PROBE_POINTS = 16
DEFAULT_NODE_CAP = 8_000_000


class IndicatorError(ValueError):
    pass


class ResourceError(RuntimeError):
    """A requested grid would exceed the node budget."""


@dataclass
class IndicatorConfig:
    h: float | None = None
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    mc_samples: int = DEFAULT_MC_SAMPLES
    probe_points: int = DEFAULT_PROBE_POINTS
    refine_levels: int = 2
    boundary_samples: int = 4000
    seed: int = 0

    def __post_init__(self):
        lam = np.asarray(self.lambda_grid, float)
        if lam.ndim != 1 or len(lam) == 0 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("lambda_grid must be a nonempty increasing sequence of positive numbers")
        self.lambda_grid = tuple(float(v) for v in lam)
        if self.mc_samples < 100:
            raise ValueError("mc_samples must be at least 100")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")


@dataclass
class IndicatorReport:
    n_max: int
    n_0: int
    n_0_star: int
    gamma_int: float
    gamma_b: float
    gamma_f: float
    gamma_f_star: float
    q_max: float
    d_vdw: float
    lambda_min_probe: float
    gamma_F: float
    d_ses_at_min: float
    d_F: float
    c_M: float
    c_H: float
    C1: float
    C2: float
    C3: float
    C4: float
    s0_bound: float
    contraction_bound: float
    eig_lower_bound: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LevelSetField:
    """Signed distance to the SAS at grid nodes, positive inside the inflated union."""

    origin: np.ndarray
    h: float
    dims: tuple[int, int, int]
    values: np.ndarray = field(repr=False)
    r_p: float = 0.0

    def nodes(self) -> np.ndarray:
        idx = np.indices(self.dims).reshape(3, -1).T
        return self.origin + self.h * idx

    def crossings(self, level: float) -> np.ndarray:
        """Points where ``values - level`` changes sign, interpolated linearly along grid edges."""
        g = self.values - level
        out = []
        for axis in range(3):
            a = [slice(None)] * 3
            b = [slice(None)] * 3
            a[axis] = slice(0, -1)
            b[axis] = slice(1, None)
            ga, gb = g[tuple(a)], g[tuple(b)]
            hit = (ga > 0) != (gb > 0)
            if not hit.any():
                continue
            ijk = np.argwhere(hit)
            t = ga[hit] / (ga[hit] - gb[hit])
            pts = self.origin + self.h * ijk.astype(float)
            pts[:, axis] += self.h * t
            out.append(pts)
        return np.vstack(out) if out else np.empty((0, 3))


# -- cardinalities -----------------------------------------------------------

def n_max(union: BallUnion) -> int:
    return max(len(n) for n in union.neighbors)


def _candidate_points(union: BallUnion, h: float) -> np.ndarray:
    lo, hi = union.bbox()
    origin, dims = grid_nodes(lo, hi, h)
    nodes = origin + h * np.indices(dims).reshape(3, -1).T
    extra = [nodes[union.contains(nodes)], union.centers]
    c, r = union.centers, union.radii
    for i in range(union.M):
        for j in union.neighbors[i]:
            if j <= i:
                continue
            circ = sphere_intersection_circle(c[i], r[i], c[j], r[j])
            if circ is not None:
                extra.append(circle_points(circ[0], circ[1], 0.999 * circ[2], 16))
                extra.append(circ[0][None, :])
            for k in union.neighbors[i]:
                if k > j and k in union.neighbors[j]:
                    tp = sphere_triple_points(c[[i, j, k]], r[[i, j, k]])
                    if len(tp):
                        cen = c[[i, j, k]].mean(0)
                        extra.append(tp + 0.01 * (cen - tp))
    return np.vstack(extra)


def _max_count(count_fn, pts: np.ndarray, h: float, levels: int):
    counts = count_fn(pts)
    best = int(counts.max())
    witness = pts[int(np.argmax(counts))]
    offs = np.indices((3, 3, 3)).reshape(3, -1).T - 1
    for level in range(1, levels + 1):
        step = h / 2 ** level
        order = np.argsort(-counts, kind="stable")
        seeds = pts[order[counts[order] >= best - 1][:256]]
        pts = (seeds[:, None, :] + step * offs[None, :, :]).reshape(-1, 3)
        counts = count_fn(pts)
        if counts.max() > best:
            best = int(counts.max())
            witness = pts[int(np.argmax(counts))]
    return best, witness


def n_0(union: BallUnion, grid_h: float | None = None, refine_levels: int = 2) -> int:
    """Sampled maximum number of balls sharing a point (a lower bound for N_0)."""
    h = grid_h or union.r_min / 6
    return _max_count(union.multiplicity, _candidate_points(union, h), h, refine_levels)[0]


def _membership(union: BallUnion, pts: np.ndarray) -> sp.csr_matrix:
    tree = cKDTree(pts)
    rows, cols = [], []
    for i, (c, r) in enumerate(zip(union.centers, union.radii)):
        idx = np.asarray(tree.query_ball_point(c, r), dtype=np.int64)
        if len(idx):
            idx = idx[inside_ball(pts[idx], c, r)]
            rows.append(idx)
            cols.append(np.full(len(idx), i))
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(pts), union.M))


def n_0_star(union: BallUnion, grid_h: float | None = None, refine_levels: int = 2) -> int:
    """As ``n_0`` for the enlarged sets Omega_j^* (union of Omega_k, k in N_j^* with j)."""
    h = grid_h or union.r_min / 6
    rows = [j for j in range(union.M) for _ in union.extended_set(j)]
    cols = [k for j in range(union.M) for k in union.extended_set(j)]
    S = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(union.M, union.M))

    def count(pts):
        hits = _membership(union, pts) @ S.T
        return np.asarray((hits > 0).sum(1)).ravel()

    return _max_count(count, _candidate_points(union, h), h, refine_levels)[0]


def q_max(union: BallUnion) -> float:
    r = union.radii
    best = 1.0
    for i in range(union.M):
        star = union.star_neighbors[i]
        star = star[star != i]
        if len(star):
            best = max(best, float(np.max((r[i] / r[star]) ** 3)))
    return best


# -- overlap constants ---------------------------------------------------------

def _delta(centers, radii, pts) -> np.ndarray:
    d = cdist(np.atleast_2d(pts), centers)
    return np.clip(radii - d, 0.0, None).sum(1)


def gamma_int(union: BallUnion, samples: int = 4000) -> float:
    """min over interior balls i of min of delta over the closed ball i; +inf if none."""
    if len(union.interior) == 0:
        return math.inf
    dirs = fibonacci_sphere(samples)
    best = math.inf
    for i in union.interior:
        nb = union.neighbors[i]
        c, r = union.centers[i], union.radii[i]
        C, R = union.centers[nb], union.radii[nb]
        k = max(2, int(round((samples / 4) ** (1 / 3))))
        t = np.linspace(-r, r, k)
        cube = np.stack(np.meshgrid(t, t, t, indexing="ij"), -1).reshape(-1, 3)
        inner = c + cube[np.linalg.norm(cube, axis=1) <= r]
        vals_s = _delta(C, R, c + r * dirs)
        vals_i = _delta(C, R, inner)
        lo = min(vals_s.min(), vals_i.min())
        u0 = dirs[int(np.argmin(vals_s))]
        th0 = (math.acos(max(-1.0, min(1.0, u0[2]))), math.atan2(u0[1], u0[0]))

        def on_sphere(a):
            s = math.sin(a[0])
            return float(_delta(C, R, c + r * np.array([s * math.cos(a[1]), s * math.sin(a[1]), math.cos(a[0])]))[0])

        res = optimize.minimize(on_sphere, th0, method="Nelder-Mead",
                                options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 400})
        best = min(best, lo, float(res.fun))
    return best


def gamma_b(beta_inf: float, r_min: float, r_max: float) -> float:
    """min{1, R_min (1 - sin a) / (2 R_max), cos(a) / 2} with a = pi/2 - beta_inf."""
    if not beta_inf > 0:
        raise GeometryError(f"exterior cone angle {beta_inf} <= 0: the cone condition fails")
    if beta_inf > math.pi / 2 + 1e-12:
        raise ValueError("beta_inf must not exceed pi/2")
    if not (r_min > 0 and r_max >= r_min):
        raise ValueError("radii must satisfy 0 < r_min <= r_max")
    a = math.pi / 2 - min(beta_inf, math.pi / 2)
    return min(1.0, r_min * (1 - math.sin(a)) / (2 * r_max), math.cos(a) / 2)


def beta_inf(union: BallUnion) -> float:
    return check_assumptions(union).beta_min


# -- fatness fractions -------------------------------------------------------

def _unit_ball(rng, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * rng.random(n)[:, None] ** (1 / 3)


def _exterior_fraction(union: BallUnion, U: np.ndarray, u2: np.ndarray, p, rho) -> float:
    """Fraction of p + rho U outside the union (U fixed unit-ball samples, u2 = |U|^2)."""
    w = p - union.centers
    near = np.flatnonzero(np.linalg.norm(w, axis=1) < rho + union.radii)
    if len(near) == 0:
        return 1.0
    # |p + rho u - m_k|^2 < R_k^2 expanded so one product serves every ball
    lhs = (rho * rho) * u2[:, None] + 2 * rho * (U @ w[near].T) + np.sum(w[near] ** 2, 1)[None, :]
    inside = np.any(lhs < union.radii[near] ** 2, axis=1)
    return 1.0 - float(inside.mean())


def _probe_xs(union: BallUnion, balls, n: int, seed: int, i: int) -> np.ndarray:
    rng = np.random.default_rng([seed, i])
    pick = np.asarray(balls)[rng.integers(len(balls), size=n)]
    return np.vstack([union.centers[i], union.centers[pick] + union.radii[pick, None] * _unit_ball(rng, n)])


def _exposed(union: BallUnion, p, eps) -> bool:
    return bool(np.all(np.linalg.norm(union.centers - p, axis=1) >= union.radii - eps))


def _fatness(union: BallUnion, star: bool, mc_samples: int, probe_points: int, seed: int,
             spacing: float | None) -> float:
    eps = 1e-9 * union.r_max
    cloud, owner, partner = union_boundary_cloud(union.centers, union.radii,
                                                 spacing or union.r_min / 12)
    rng = np.random.default_rng(seed)
    U = _unit_ball(rng, mc_samples)
    u2 = np.sum(U * U, 1)
    indices = union.boundary_star if star else union.boundary
    best = math.inf
    for i in indices:
        pieces = union.neighbors[i] if star else np.array([i])
        sel = np.isin(owner, pieces) | np.isin(partner, pieces)
        if not sel.any():
            log.warning("ball %d: no sampled boundary piece; skipped in the fatness estimate", i)
            continue
        tree = cKDTree(cloud[sel])
        balls = union.extended_set(i) if star else [i]
        for x in _probe_xs(union, balls, probe_points, seed, int(i)):
            dist, k = tree.query(x)
            p = cloud[sel][k]
            for j in pieces:
                v = x - union.centers[j]
                nv = np.linalg.norm(v)
                if nv == 0:
                    continue
                q = union.centers[j] + union.radii[j] * v / nv
                dq = np.linalg.norm(q - x)
                if dq < dist and _exposed(union, q, eps):
                    dist, p = dq, q
            if dist <= 0:
                continue
            best = min(best, _exterior_fraction(union, U, u2, p, dist))
    return best


def gamma_f(union: BallUnion, mc_samples: int = DEFAULT_MC_SAMPLES, probe_points: int = DEFAULT_PROBE_POINTS,
            seed: int = 0, spacing: float | None = None) -> float:
    """Monte Carlo estimate of the exterior fatness fraction over boundary balls."""
    return _fatness(union, False, mc_samples, probe_points, seed, spacing)


def gamma_f_star(union: BallUnion, mc_samples: int = DEFAULT_MC_SAMPLES,
                 probe_points: int = DEFAULT_PROBE_POINTS, seed: int = 0,
                 spacing: float | None = None) -> float:
    """As ``gamma_f`` over I_b^*, sampling Omega_i^* and projecting onto the enlarged boundary piece."""
    if len(union.boundary_star) == 0:
        return math.inf
    return _fatness(union, True, mc_samples, probe_points, seed, spacing)


# -- distance fields ------------------------------------------------------------

def sas_cloud_spacing(h: float, r_p: float, r_max: float) -> float:
    """Boundary-sample spacing for the SAS; distances >= r_p tolerate sparser samples.

    A sample offset t along a surface seen from distance d costs about t^2/(2d)
    in distance, so the spacing grows like sqrt(1 + r_p / r_max).
    """
    return 0.5 * h * math.sqrt(1 + r_p / r_max)


def sas_field(union: BallUnion, r_p: float, h: float, pad: float | None = None,
              node_cap: int = DEFAULT_NODE_CAP, band: float | None = None) -> LevelSetField:
    """Signed distance to the SAS at the nodes of a grid covering the SAS box plus ``pad``.

    Inside/outside comes from the exact membership test; magnitudes are nearest
    distances to a dense sample of the SAS boundary (spheres and crease circles).
    With ``band`` set, magnitudes above it are clipped to ``band``: enough to
    locate level sets below ``band - h`` and much cheaper for large ``r_p``.
    """
    if r_p < 0 or not h > 0:
        raise ValueError("need r_p >= 0 and h > 0")
    if pad is None:
        pad = 2 * r_p + 4 * h
    lo, hi = union.bbox()
    lo = lo - r_p - pad
    hi = hi + r_p + pad
    origin, dims = grid_nodes(lo, hi, h)
    if np.prod(dims, dtype=float) > node_cap:
        raise ResourceError(f"SAS grid needs {int(np.prod(dims, dtype=float))} nodes (> {node_cap}); "
                            f"use a larger h")
    nodes = origin + h * np.indices(dims).reshape(3, -1).T
    cloud = union_boundary_cloud(union.centers, union.radii + r_p,
                                 sas_cloud_spacing(h, r_p, union.r_max))[0]
    if band is None:
        dist, _ = cKDTree(cloud).query(nodes)
    else:
        dist, _ = cKDTree(cloud).query(nodes, distance_upper_bound=band)
        dist = np.minimum(dist, band)
    sign = np.where(union.contains(nodes, pad=r_p), 1.0, -1.0)
    return LevelSetField(origin, float(h), tuple(dims), (sign * dist).reshape(dims), float(r_p))


def _polish_max(fun, starts, h, inside):
    """Local maximization of ``fun`` over the union from several starting points."""
    best = -math.inf
    arg = None
    for x0 in starts:
        val0 = fun(x0)
        if val0 > best:
            best, arg = val0, x0
        simplex = x0 + np.vstack([np.zeros(3), 0.5 * h * np.eye(3)])
        res = optimize.minimize(lambda x: -fun(x) if inside(x) else 0.0, x0, method="Nelder-Mead",
                                options={"initial_simplex": simplex, "xatol": 1e-4 * h,
                                         "fatol": 1e-9, "maxiter": 300})
        if inside(res.x) and -res.fun > best:
            best, arg = -res.fun, res.x
    return best, arg


def _max_distance_inside(union: BallUnion, field_: LevelSetField, targets: np.ndarray, polish: int = 4):
    nodes = field_.nodes()
    inside = union.contains(nodes)
    tree = cKDTree(targets)
    d, _ = tree.query(nodes[inside])
    top = np.argsort(-d, kind="stable")[:polish]
    starts = nodes[inside][top]
    c, r2 = union.centers, union.radii ** 2
    return _polish_max(lambda x: float(tree.query(x)[0]), starts, field_.h,
                       lambda x: bool(np.any(np.sum((c - x) ** 2, 1) < r2)))


def d_vdw(union: BallUnion, h: float | None = None) -> float:
    """Largest distance from a point of the union to its boundary."""
    h = h or union.r_min / 6
    f = sas_field(union, 0.0, h, pad=2 * h)
    cloud = union_boundary_cloud(union.centers, union.radii, sas_cloud_spacing(h, 0.0, union.r_max))[0]
    return float(_max_distance_inside(union, f, cloud)[0])


def gamma_lambda(lam: float, d_vdw_: float, d_ses: float) -> float:
    return min((2 * lam * d_vdw_ / d_ses) ** 3, 1.0) / 8


def d_ses(union: BallUnion, r_p: float, h: float, floor: float = 0.0) -> float | None:
    """Largest distance from the union to the SES of probe radius ``r_p``; None if the SES is empty.

    The SES lies inside the convex hull of the union, so the grid only needs
    the union's bounding box plus two cells. ``floor`` is a known lower bound
    (the SES encloses the union, so d_SES >= d_vdw).
    """
    f = sas_field(union, r_p, h, pad=2 * h - r_p, band=r_p + 1.01 * h)
    ses = f.crossings(r_p)
    if len(ses) == 0:
        return None
    return max(_max_distance_inside(union, f, ses)[0], floor)


class FatnessResult(NamedTuple):
    d_F: float
    lambda_min: float
    gamma_F: float
    d_ses_at_min: float


def d_F_profile(union: BallUnion, h: float | None = None, lambda_grid=DEFAULT_LAMBDA_GRID,
                d_vdw_: float | None = None, full: bool = False) -> list[tuple[float, float, float, float]]:
    """Rows (lambda, d_SES, gamma_lambda, d_SES / gamma_lambda) over the probe grid.

    The SES region grows with the probe radius, so d_SES is nondecreasing in
    lambda. Once gamma_lambda saturates at 1/8 the quotient is 8 d_SES, which
    cannot decrease further along the grid; the scan stops there unless
    ``full`` is set.
    """
    h = h or union.r_min / 6
    dv = d_vdw_ if d_vdw_ is not None else d_vdw(union, h)
    rows = []
    for lam in lambda_grid:
        ds = d_ses(union, lam * dv, h, floor=dv)
        if ds is None:
            log.warning("SES empty for lambda=%g; skipped", lam)
            continue
        g = gamma_lambda(lam, dv, ds)
        rows.append((float(lam), ds, g, ds / g))
        if g == 0.125 and not full:
            break
    return rows


def d_F(union: BallUnion, h: float | None = None, lambda_grid=DEFAULT_LAMBDA_GRID,
        d_vdw_: float | None = None) -> FatnessResult:
    rows = d_F_profile(union, h, lambda_grid, d_vdw_)
    if not rows:
        raise IndicatorError("no probe radius produced a nonempty SES; refine h")
    lam, ds, g, q = min(rows, key=lambda r: r[3])
    return FatnessResult(q, lam, g, ds)


# -- constants ----------------------------------------------------------------

def hardy_constants() -> tuple[float, float]:
    c_m = 10 * math.sqrt(10)
    c_h = 2 * (2 / math.pi) * (1 + 8 * 14) * (4 / math.log(2))
    return c_m, c_h


def contraction_from_s0(s0: float) -> float:
    if s0 < 0:
        raise ValueError("s0 must be nonnegative")
    return math.sqrt(s0 / (1 + s0))


def bound_constants(report: IndicatorReport, n_interior: int | None = None):
    """(C1, C2, C3, C4, s0_bound, contraction_bound) from the indicator fields.

    An infinite ``gamma_int`` marks an empty I_int; ``n_interior`` cross-checks it.
    """
    interior_empty = math.isinf(report.gamma_int)
    if n_interior is not None and interior_empty != (n_interior == 0):
        raise IndicatorError(f"gamma_int = {report.gamma_int} is inconsistent with {n_interior} interior balls")
    n0, c_m, c_h = report.n_0, report.c_M, report.c_H
    C1 = 2 * n0 * (1 + n0 ** 2 * c_m ** 2 * c_h ** 2 / (report.gamma_b ** 2 * report.gamma_f ** 2))
    C2 = 0.0 if interior_empty else 2 * n0 ** 2 / report.gamma_int ** 2
    C3 = report.n_max * C1
    C4 = 64 * C2 * n0 * c_h ** 2 * c_m ** 2
    s0 = C3 if interior_empty else C3 + C4 * report.d_F ** 2
    return C1, C2, C3, C4, s0, contraction_from_s0(s0)


def eig_lower_bound(c_h: float, c_m: float, d_f: float) -> float:
    if min(c_h, c_m, d_f) <= 0:
        raise ValueError("constants must be positive")
    return 1.0 / (c_h * c_m * d_f)


def compute_indicators(union: BallUnion, config: IndicatorConfig | None = None,
                       beta: float | None = None) -> IndicatorReport:
    cfg = config or IndicatorConfig()
    h = cfg.h or union.r_min / 6
    beta = beta_inf(union) if beta is None else beta
    dv = d_vdw(union, h)
    fat = d_F(union, h, cfg.lambda_grid, dv)
    c_m, c_h = hardy_constants()
    report = IndicatorReport(
        n_max=n_max(union),
        n_0=n_0(union, h, cfg.refine_levels),
        n_0_star=n_0_star(union, h, cfg.refine_levels),
        gamma_int=gamma_int(union, cfg.boundary_samples),
        gamma_b=gamma_b(beta, union.r_min, union.r_max),
        gamma_f=gamma_f(union, cfg.mc_samples, cfg.probe_points, cfg.seed),
        gamma_f_star=gamma_f_star(union, cfg.mc_samples, cfg.probe_points, cfg.seed),
        q_max=q_max(union),
        d_vdw=dv,
        lambda_min_probe=fat.lambda_min,
        gamma_F=fat.gamma_F,
        d_ses_at_min=fat.d_ses_at_min,
        d_F=fat.d_F,
        c_M=c_m, c_H=c_h, C1=0.0, C2=0.0, C3=0.0, C4=0.0,
        s0_bound=0.0, contraction_bound=0.0,
        eig_lower_bound=eig_lower_bound(c_h, c_m, fat.d_F),
    )
    (report.C1, report.C2, report.C3, report.C4,
     report.s0_bound, report.contraction_bound) = bound_constants(report, len(union.interior))
    log.info("indicator budgets: mc_samples=%d probe_points=%d seed=%d h=%g",
             cfg.mc_samples, cfg.probe_points, cfg.seed, h)
    return report
