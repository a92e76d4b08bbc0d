"""Ball-union domains: construction, neighbor structure and assumption checks.

Indices are 0-based throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

TANGENCY_RTOL = 1e-12
DEFAULT_SPHERE_SAMPLES = 2000
DEFAULT_CIRCLE_SAMPLES = 64


class GeometryError(ValueError):
    """Raised for malformed or degenerate ball geometries."""


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"nonpositive radius {self.radius}")


def inside_ball(pts, c, r) -> np.ndarray:
    """Strict membership |x - c| < r; the one predicate used for every inside test."""
    d = np.asarray(pts, float) - c
    return d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2] < r * r


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors on the sphere, shape (n, 3)."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _orthonormal_pair(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def sphere_intersection_circle(c1, r1, c2, r2):
    """Center, unit axis and radius of the circle where two spheres meet, or None."""
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    d = np.linalg.norm(c2 - c1)
    if d == 0 or d >= r1 + r2 or d <= abs(r1 - r2):
        return None
    u = (c2 - c1) / d
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    rho2 = r1 * r1 - a * a
    if rho2 <= 0:
        return None
    return c1 + a * u, u, math.sqrt(rho2)


def circle_points(center, axis, rho, n: int) -> np.ndarray:
    e1, e2 = _orthonormal_pair(np.asarray(axis, float))
    t = 2 * math.pi * (np.arange(n) + 0.5) / n
    return np.asarray(center) + rho * (np.outer(np.cos(t), e1) + np.outer(np.sin(t), e2))


def sphere_triple_points(c, r) -> np.ndarray:
    """Common points of three spheres (0, 1 or 2 rows)."""
    p1, p2, p3 = (np.asarray(ci, float) for ci in c)
    r1, r2, r3 = r
    ex = p2 - p1
    d = np.linalg.norm(ex)
    if d == 0:
        return np.empty((0, 3))
    ex /= d
    i = ex @ (p3 - p1)
    ey = p3 - p1 - i * ex
    ny = np.linalg.norm(ey)
    if ny < 1e-14 * max(d, 1.0):
        return np.empty((0, 3))
    ey /= ny
    ez = np.cross(ex, ey)
    j = ey @ (p3 - p1)
    x = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    y = (r1 * r1 - r3 * r3 + i * i + j * j) / (2 * j) - i * x / j
    z2 = r1 * r1 - x * x - y * y
    if z2 < 0:
        return np.empty((0, 3))
    z = math.sqrt(z2)
    base = p1 + x * ex + y * ey
    if z == 0:
        return base[None, :]
    return np.vstack([base + z * ez, base - z * ez])


@dataclass(frozen=True, eq=False)
class BallUnion:
    """Union of open balls with its neighbor structure and index partitions.

    Build with :meth:`from_arrays`; instances are immutable.
    """

    centers: np.ndarray
    radii: np.ndarray
    neighbors: tuple[np.ndarray, ...] = field(repr=False)
    interior: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    interior_star: np.ndarray = field(repr=False)
    boundary_star: np.ndarray = field(repr=False)
    star_neighbors: tuple[np.ndarray, ...] = field(repr=False)
    sphere_samples: int = DEFAULT_SPHERE_SAMPLES

    @classmethod
    def from_arrays(cls, centers, radii, sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> "BallUnion":
        centers = np.array(centers, dtype=float).reshape(-1, 3)
        radii = np.array(radii, dtype=float).reshape(-1)
        if len(centers) == 0:
            raise GeometryError("ball union needs at least one ball")
        if len(radii) != len(centers):
            raise GeometryError("centers and radii differ in length")
        if not np.all(np.isfinite(centers)) or not np.all(np.isfinite(radii)):
            raise GeometryError("non-finite center or radius")
        if np.any(radii <= 0):
            bad = int(np.flatnonzero(radii <= 0)[0])
            raise GeometryError(f"nonpositive radius {radii[bad]} for ball {bad}")
        centers.setflags(write=False)
        radii.setflags(write=False)
        nbrs = compute_neighbors(centers, radii)
        interior, boundary, istar, bstar, star = classify_indices(centers, radii, nbrs, sphere_samples)
        return cls(centers, radii, nbrs, interior, boundary, istar, bstar, star, sphere_samples)

    @classmethod
    def from_balls(cls, balls, sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> "BallUnion":
        return cls.from_arrays([b.center for b in balls], [b.radius for b in balls], sphere_samples)

    @property
    def M(self) -> int:
        return len(self.radii)

    @property
    def r_min(self) -> float:
        return float(self.radii.min())

    @property
    def r_max(self) -> float:
        return float(self.radii.max())

    @property
    def balls(self) -> list[Ball]:
        return [Ball(tuple(c), float(r)) for c, r in zip(self.centers, self.radii)]

    def neighbors0(self, i: int) -> np.ndarray:
        n = self.neighbors[i]
        return n[n != i]

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.centers - self.radii[:, None]).min(0), (self.centers + self.radii[:, None]).max(0)

    def contains(self, pts, pad: float = 0.0) -> np.ndarray:
        """Strict membership in the union of the balls inflated by ``pad``."""
        return self.multiplicity(pts, pad) > 0

    def multiplicity(self, pts, pad: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        count = np.zeros(len(pts), dtype=np.int32)
        tree = cKDTree(pts)
        for c, r in zip(self.centers, self.radii):
            idx = tree.query_ball_point(c, r + pad)
            if not idx:
                continue
            idx = np.asarray(idx)
            count[idx[inside_ball(pts[idx], c, r + pad)]] += 1
        return count

    def extended_set(self, i: int) -> np.ndarray:
        """Indices k with Omega_k part of Omega_i^* (N_i^* together with i)."""
        return np.union1d(self.star_neighbors[i], [i])

    def boundary_cloud(self, pad: float = 0.0, spacing: float | None = None):
        """Sample the boundary of the (inflated) union; see ``union_boundary_cloud``."""
        return union_boundary_cloud(self.centers, self.radii + pad, spacing=spacing,
                                    n_sphere=self.sphere_samples)

    def with_ball(self, center, radius) -> "BallUnion":
        return BallUnion.from_arrays(np.vstack([self.centers, center]),
                                     np.append(self.radii, radius), self.sphere_samples)


def compute_neighbors(centers, radii) -> tuple[np.ndarray, ...]:
    """Per-ball sorted neighbor lists under open overlap (each list contains i)."""
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    m = len(radii)
    tol = TANGENCY_RTOL * radii.max()
    lists = [[i] for i in range(m)]
    tree = cKDTree(centers)
    for i, j in tree.query_pairs(2 * radii.max()):
        d = np.linalg.norm(centers[i] - centers[j])
        if radii[i] + radii[j] - d > tol:
            lists[i].append(j)
            lists[j].append(i)
    out = []
    for lst in lists:
        a = np.array(sorted(lst), dtype=np.intp)
        a.setflags(write=False)
        out.append(a)
    return tuple(out)


def classify_indices(centers, radii, neighbors, sphere_samples: int = DEFAULT_SPHERE_SAMPLES):
    """Split indices into interior/boundary balls by sampling each sphere.

    Ball i is interior when every Fibonacci sample of its sphere lies strictly
    inside some other neighbor ball. Returns ``(interior, boundary,
    interior_star, boundary_star, star_neighbors)``.
    """
    if sphere_samples < 100:
        raise ValueError("sphere_samples must be at least 100")
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    dirs = fibonacci_sphere(sphere_samples)
    m = len(radii)
    is_int = np.zeros(m, bool)
    for i in range(m):
        others = neighbors[i][neighbors[i] != i]
        if len(others) == 0:
            continue
        pts = centers[i] + radii[i] * dirs
        covered = np.zeros(len(pts), bool)
        for j in others:
            covered |= np.einsum("ij,ij->i", pts - centers[j], pts - centers[j]) < radii[j] ** 2
            if covered.all():
                break
        is_int[i] = covered.all()
    interior = np.flatnonzero(is_int)
    boundary = np.flatnonzero(~is_int)
    star = tuple(np.asarray([j for j in neighbors[i] if is_int[j]], dtype=np.intp) for i in range(m))
    is_istar = np.array([is_int[i] and all(is_int[j] for j in neighbors[i]) for i in range(m)], bool)
    return interior, boundary, np.flatnonzero(is_istar), np.flatnonzero(~is_istar), star


def union_boundary_cloud(centers, radii, spacing=None, n_sphere=DEFAULT_SPHERE_SAMPLES,
                         n_circle=DEFAULT_CIRCLE_SAMPLES):
    """Points on the boundary of a union of balls.

    Sphere samples not strictly inside another ball plus samples on the pairwise
    intersection circles (which carry the creases of the boundary). With
    ``spacing`` set, sample counts scale with sphere area / circle length.
    Returns (points, owner, partner): a sphere sample of ball i has owner i and
    partner -1; a sample on the circle of balls i < j has owner i, partner j.
    """
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    m = len(radii)
    nbrs = compute_neighbors(centers, radii)
    eps = 1e-9 * radii.max()
    pts_all, owner_all, partner_all = [], [], []

    def keep(p, cand, skip):
        cand = np.setdiff1d(cand, skip)
        if len(cand) == 0:
            return np.ones(len(p), bool)
        return np.all(cdist(p, centers[cand]) >= radii[cand] - eps, axis=1)

    for i in range(m):
        cand = nbrs[i][nbrs[i] != i]
        n = n_sphere if spacing is None else max(64, int(4 * math.pi * radii[i] ** 2 / spacing ** 2))
        p = centers[i] + radii[i] * fibonacci_sphere(n)
        ok = keep(p, cand, ())
        pts_all.append(p[ok])
        owner_all.append(np.full(ok.sum(), i))
        partner_all.append(np.full(ok.sum(), -1))
        for j in cand[cand > i]:
            circ = sphere_intersection_circle(centers[i], radii[i], centers[j], radii[j])
            if circ is None:
                continue
            nc = n_circle if spacing is None else max(n_circle, int(2 * math.pi * circ[2] / spacing))
            q = circle_points(*circ, nc)
            okq = keep(q, np.union1d(cand, nbrs[j]), (i, j))
            pts_all.append(q[okq])
            owner_all.append(np.full(okq.sum(), i))
            partner_all.append(np.full(okq.sum(), j))
    return np.vstack(pts_all), np.concatenate(owner_all), np.concatenate(partner_all)


def union_boundary_distance(centers, radii, x, upper: float | None = None) -> float:
    """Exact distance from ``x`` to the boundary of a union of balls.

    The nearest boundary point is a radial projection onto an exposed sphere
    patch, the nearest point of an exposed intersection-circle arc, or an
    exposed triple point; the minimum over the exposed candidates is exact.
    ``upper`` (any known upper bound) prunes spheres that cannot host it.
    Cost grows with the cube of the number of retained balls.
    """
    centers = np.asarray(centers, float)
    radii = np.asarray(radii, float)
    x = np.asarray(x, float)
    eps = 1e-9 * radii.max()
    dc = np.linalg.norm(centers - x, axis=1)
    near = np.flatnonzero(np.abs(dc - radii) <= (np.inf if upper is None else upper + eps))
    best = np.inf if upper is None else float(upper)

    def exposed(p):
        return np.all(np.linalg.norm(centers - p, axis=1) >= radii - eps)

    for j in near:
        if dc[j] > 0:
            p = centers[j] + radii[j] * (x - centers[j]) / dc[j]
            if exposed(p):
                best = min(best, abs(dc[j] - radii[j]))
        elif any(exposed(q) for q in centers[j] + radii[j] * fibonacci_sphere(DEFAULT_SPHERE_SAMPLES)):
            best = min(best, float(radii[j]))  # every point of sphere j is R_j away
    for a, j in enumerate(near):
        for k in near[a + 1:]:
            circ = sphere_intersection_circle(centers[j], radii[j], centers[k], radii[k])
            if circ is None:
                continue
            cc, ax, rho = circ
            w = (x - cc) - ((x - cc) @ ax) * ax
            nw = np.linalg.norm(w)
            pts = [cc + rho * w / nw] if nw > 1e-12 * rho else list(circle_points(cc, ax, rho, 256))
            for p in pts:
                if exposed(p):
                    best = min(best, float(np.linalg.norm(p - x)))
            for l in near[np.searchsorted(near, k) + 1:]:
                for p in sphere_triple_points(centers[[j, k, l]], radii[[j, k, l]]):
                    if exposed(p):
                        best = min(best, float(np.linalg.norm(p - x)))
    return best


def boundary_distance(union: "BallUnion", pts) -> np.ndarray:
    """Exact distance to the union boundary for many points at once.

    Same candidate set as ``union_boundary_distance`` (exposed radial
    projections, nearest exposed circle points, exposed triple points), with
    exposure tested only against the balls able to cover each candidate.
    Points on an intersection-circle axis fall back to 64 circle samples.
    """
    X = np.atleast_2d(np.asarray(pts, float))
    c, r = union.centers, union.radii
    eps = 1e-9 * union.r_max
    best = np.full(len(X), np.inf)

    def exposed(P, cand):
        if len(cand) == 0:
            return np.ones(len(P), bool)
        return np.all(cdist(P, c[cand]) >= r[cand] - eps, axis=1)

    for j in range(union.M):
        w = X - c[j]
        nw = np.linalg.norm(w, axis=1)
        ok = nw > 0
        P = c[j] + r[j] * w[ok] / nw[ok, None]
        d = np.abs(nw[ok] - r[j])
        e = exposed(P, union.neighbors0(j))
        idx = np.flatnonzero(ok)[e]
        best[idx] = np.minimum(best[idx], d[e])
        if not ok.all() and exposed(c[j] + r[j] * fibonacci_sphere(DEFAULT_SPHERE_SAMPLES),
                                    union.neighbors0(j)).any():
            best[~ok] = np.minimum(best[~ok], r[j])  # at the center every sphere point is R_j away
    triples = []
    for i in range(union.M):
        for j in union.neighbors[i]:
            if j <= i:
                continue
            circ = sphere_intersection_circle(c[i], r[i], c[j], r[j])
            if circ is None:
                continue
            cc, ax, rho = circ
            cand = np.setdiff1d(np.union1d(union.neighbors[i], union.neighbors[j]), [i, j])
            w = (X - cc) - np.outer((X - cc) @ ax, ax)
            nw = np.linalg.norm(w, axis=1)
            on_axis = nw <= 1e-12 * rho
            P = cc + rho * w / np.where(on_axis, 1.0, nw)[:, None]
            e = exposed(P, cand) & ~on_axis
            best[e] = np.minimum(best[e], np.linalg.norm(P[e] - X[e], axis=1))
            if on_axis.any():
                ring = circle_points(cc, ax, rho, 64)
                ring = ring[exposed(ring, cand)]
                if len(ring):
                    k = np.flatnonzero(on_axis)
                    best[k] = np.minimum(best[k], cdist(X[k], ring).min(1))
            for k in union.neighbors[i]:
                if k > j and k in union.neighbors[j]:
                    tp = sphere_triple_points(c[[i, j, k]], r[[i, j, k]])
                    if len(tp):
                        triples.append(tp[exposed(tp, np.setdiff1d(cand, [k]))])
    if triples:
        T = np.vstack(triples)
        if len(T):
            best = np.minimum(best, cKDTree(T).query(X)[0])
    return best


def load_xyzr(path, sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> BallUnion:
    """Read whitespace separated ``x y z r`` lines; ``#`` starts a comment."""
    centers, radii = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise GeometryError(f"{path}:{lineno}: expected 4 numbers 'x y z r', got {len(fields)}")
        vals = []
        for col, tok in enumerate(fields, start=1):
            try:
                vals.append(float(tok))
            except ValueError:
                raise GeometryError(f"{path}:{lineno}:{col}: cannot parse {tok!r} as a number") from None
        if vals[3] <= 0:
            raise GeometryError(f"{path}:{lineno}: nonpositive radius {vals[3]}")
        centers.append(vals[:3])
        radii.append(vals[3])
    if not centers:
        raise GeometryError(f"{path}: no balls found")
    return BallUnion.from_arrays(centers, radii, sphere_samples)


def save_xyzr(union: BallUnion, path) -> None:
    lines = [f"{c[0]:.12g} {c[1]:.12g} {c[2]:.12g} {r:.12g}" for c, r in zip(union.centers, union.radii)]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class AssumptionReport:
    connected: bool
    containment_violations: list[tuple[int, int]]
    beta_min: float
    gamma_alpha: float
    witness_points: np.ndarray = field(repr=False)
    n_points: int = 0

    @property
    def a4_ok(self) -> bool:
        return self.beta_min > 0

    @property
    def ok(self) -> bool:
        return self.connected and not self.containment_violations and self.a4_ok


def cone_margin(v: np.ndarray) -> tuple[float, np.ndarray]:
    """max over unit n of min_t (-n . v_t) for unit rows v_t."""
    w = -np.asarray(v, float)
    if len(w) == 1:
        return 1.0, w[0]
    n0 = w.mean(0)
    nn = np.linalg.norm(n0)
    n0 = n0 / nn if nn > 1e-12 else w[0]
    x0 = np.append(n0, (w @ n0).min())
    res = optimize.minimize(
        lambda x: -x[3], x0, method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda x: w @ x[:3] - x[3]},
                     {"type": "ineq", "fun": lambda x: 1.0 - x[:3] @ x[:3]}],
        options={"ftol": 1e-13, "maxiter": 200},
    )
    n = res.x[:3] / max(np.linalg.norm(res.x[:3]), 1e-300)
    val = float((w @ n).min())
    if val < x0[3]:
        return float(x0[3]), n0
    return val, n


def check_assumptions(union: BallUnion, samples: int = DEFAULT_CIRCLE_SAMPLES) -> AssumptionReport:
    """Sampled check of connectivity, non-containment and the exterior cone condition."""
    m = union.M
    c, r = union.centers, union.radii
    rows = [i for i in range(m) for j in union.neighbors[i]]
    cols = [j for i in range(m) for j in union.neighbors[i]]
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
    ncomp, _ = connected_components(g, directed=False)

    viol = []
    tree = cKDTree(c)
    for i, j in tree.query_pairs(2 * union.r_max):
        d = np.linalg.norm(c[i] - c[j])
        if d + r[i] <= r[j]:
            viol.append((i, j))
        if d + r[j] <= r[i]:
            viol.append((j, i))
    viol.sort()

    tol = 1e-9 * union.r_max
    cand = []
    for i in range(m):
        for j in union.neighbors[i]:
            if j <= i:
                continue
            circ = sphere_intersection_circle(c[i], r[i], c[j], r[j])
            if circ is not None:
                cand.append(circle_points(*circ, samples))
            for k in union.neighbors[i]:
                if k <= j or k not in union.neighbors[j]:
                    continue
                cand.append(sphere_triple_points(c[[i, j, k]], r[[i, j, k]]))
    best, witness, npts = 1.0, [], 0
    if cand:
        pts = np.vstack(cand)
        dist = np.linalg.norm(pts[:, None, :] - c[None, :, :], axis=2) if m <= 64 else None
        for p_idx, y in enumerate(pts):
            dy = dist[p_idx] if dist is not None else np.linalg.norm(c - y, axis=1)
            if np.any(dy < r - tol):
                continue
            inc = np.flatnonzero(np.abs(dy - r) <= tol)
            if len(inc) < 2:
                continue
            npts += 1
            v = (c[inc] - y) / dy[inc, None]
            val, _ = cone_margin(v)
            if val < best - 1e-12:
                best, witness = val, [y]
            elif abs(val - best) <= 1e-12:
                witness.append(y)
    gamma_alpha = best
    beta = math.pi / 2 - math.acos(min(1.0, max(-1.0, gamma_alpha)))
    return AssumptionReport(
        connected=ncomp == 1,
        containment_violations=viol,
        beta_min=beta,
        gamma_alpha=gamma_alpha,
        witness_points=np.array(witness).reshape(-1, 3),
        n_points=npts,
    )
