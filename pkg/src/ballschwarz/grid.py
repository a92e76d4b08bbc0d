"""Stair-step finite-difference discretization of the Poisson problem on a ball union."""
from __future__ import annotations

from dataclasses import dataclass, field

import logging

import numpy as np
import scipy.sparse as sp

from .geometry import BallUnion, inside_ball

DEFAULT_DOF_CAP = 2_000_000

log = logging.getLogger(__name__)


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Uniform Cartesian grid; DOFs are nodes strictly inside the union.

    Node (ix, iy, iz) sits at ``origin + h * (ix, iy, iz)``. ``laplacian`` is the
    7-point operator scaled by 1/h^2 with exterior stencil neighbors eliminated
    (homogeneous Dirichlet).
    """

    origin: np.ndarray
    h: float
    dims: tuple[int, int, int]
    node_index: np.ndarray = field(repr=False)
    node_coords: np.ndarray = field(repr=False)
    laplacian: sp.csr_matrix = field(repr=False)

    @property
    def n_dofs(self) -> int:
        return self.node_coords.shape[0]


def grid_nodes(lo, hi, h: float):
    """Node origin and dims of the h-aligned grid covering [lo, hi]."""
    origin = np.floor(np.asarray(lo) / h - 1) * h
    dims = tuple(int(v) for v in np.ceil((np.asarray(hi) - origin) / h) + 2)
    return origin, dims


def build_grid(union: BallUnion, h: float | None = None, dof_cap: int = DEFAULT_DOF_CAP) -> GridDomain:
    if h is None:
        h = union.r_min / 6
    if not h > 0:
        raise GridError("grid spacing must be positive")
    lo, hi = union.bbox()
    origin, dims = grid_nodes(lo, hi, h)
    approx = np.sum(4 / 3 * np.pi * union.radii ** 3) / h ** 3
    if min(approx, np.prod(dims, dtype=float)) > 4 * dof_cap:
        raise GridError(f"grid at h={h} would exceed the DOF cap {dof_cap}; use a larger h")
    inside = np.zeros(dims, bool)
    for c, r in zip(union.centers, union.radii):
        a = np.maximum(np.floor((c - r - origin) / h).astype(int), 0)
        b = np.minimum(np.ceil((c + r - origin) / h).astype(int) + 1, dims)
        ijk = np.stack(np.meshgrid(*(np.arange(a[k], b[k]) for k in range(3)), indexing="ij"), axis=-1)
        inside[a[0]:b[0], a[1]:b[1], a[2]:b[2]] |= inside_ball(origin + h * ijk, c, r)
    n = int(inside.sum())
    if n == 0:
        raise GridError(f"no grid node inside the union at h={h}")
    if n > dof_cap:
        raise GridError(f"{n} DOFs exceed the cap {dof_cap}; use a larger h")
    index = np.full(dims, -1, dtype=np.int64)
    index[inside] = np.arange(n)
    ijk = np.argwhere(inside)
    coords = origin + h * ijk

    rows, cols = [], []
    for axis in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis] = slice(0, -1)
        b[axis] = slice(1, None)
        p, q = index[tuple(a)], index[tuple(b)]
        both = (p >= 0) & (q >= 0)
        rows.append(p[both])
        cols.append(q[both])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    off = sp.coo_matrix((np.full(len(r), -1.0), (r, c)), shape=(n, n))
    A = (off + off.T + sp.identity(n, format="coo") * 6.0) / h ** 2
    A = A.tocsr()
    A.sort_indices()
    coords.setflags(write=False)
    index.setflags(write=False)
    return GridDomain(origin, float(h), dims, index, coords, A)


def subdomain_dofs(grid: GridDomain, union: BallUnion, i: int) -> np.ndarray:
    """DOFs strictly inside ball i, sorted."""
    c, r = union.centers[i], union.radii[i]
    lo = np.maximum(np.floor((c - r - grid.origin) / grid.h).astype(int), 0)
    hi = np.minimum(np.ceil((c + r - grid.origin) / grid.h).astype(int) + 1, grid.dims)
    block = grid.node_index[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    idx = block[block >= 0]
    return np.sort(idx[inside_ball(grid.node_coords[idx], c, r)])


def all_subdomain_dofs(grid: GridDomain, union: BallUnion, validate: bool = True) -> list[np.ndarray]:
    """DOF lists of every ball; optionally check the discrete overlap mirrors N_i.

    A neighbor pair whose lens is at least 2h deep must share a DOF; thinner
    lenses may legitimately contain no node and only produce a warning.
    """
    lists = [subdomain_dofs(grid, union, i) for i in range(union.M)]
    if validate:
        for i, d in enumerate(lists):
            if len(d) == 0:
                raise GridError(f"ball {i} holds no DOF at h={grid.h}; refine the grid")
        thin = 0
        for i in range(union.M):
            for j in union.neighbors[i]:
                if j <= i or len(np.intersect1d(lists[i], lists[j], assume_unique=True)):
                    continue
                depth = union.radii[i] + union.radii[j] - np.linalg.norm(union.centers[i] - union.centers[j])
                if depth >= 2 * grid.h:
                    raise GridError(f"overlapping balls {i},{j} share no DOF at h={grid.h}; refine the grid")
                thin += 1
        if thin:
            log.warning("%d thin overlap lenses hold no DOF at h=%g", thin, grid.h)
    return lists


def assemble_rhs(grid: GridDomain, f=1.0) -> np.ndarray:
    """Right-hand side f(node) at every DOF; ``f`` is a constant or a callable on (N,3)."""
    if callable(f):
        vals = np.asarray(f(grid.node_coords), float).reshape(-1)
        if vals.shape != (grid.n_dofs,):
            raise ValueError("rhs callable must return one value per DOF")
    else:
        vals = np.full(grid.n_dofs, float(f))
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ValueError(f"non-finite rhs value at node {grid.node_coords[bad]}")
    return vals
