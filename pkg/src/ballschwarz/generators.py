"""Experiment geometries: unit lattices and linear chains of balls."""
from __future__ import annotations

import numpy as np

from .geometry import DEFAULT_SPHERE_SAMPLES, BallUnion, GeometryError, load_xyzr

DEFAULT_RADIUS = 0.9


def lattice(nx: int, ny: int, nz: int, r: float = DEFAULT_RADIUS,
            sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> BallUnion:
    """Balls of radius ``r`` centered on [1,nx]x[1,ny]x[1,nz] intersected with N^3.

    Centers are ordered with z varying fastest, then y, then x.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("lattice dimensions must be >= 1")
    if nx * ny * nz > 1 and r <= 0.5:
        raise GeometryError(f"radius {r} <= 0.5 leaves lattice neighbors disjoint (the union must be connected through overlaps)")
    g = np.stack(np.meshgrid(np.arange(1, nx + 1), np.arange(1, ny + 1), np.arange(1, nz + 1),
                             indexing="ij"), axis=-1).reshape(-1, 3)
    return BallUnion.from_arrays(g.astype(float), np.full(len(g), float(r)), sphere_samples)


def chain(M: int, spacing: float = 1.0, r: float = DEFAULT_RADIUS,
          sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> BallUnion:
    """``M`` balls on the x axis, symmetric about the origin."""
    if M < 1:
        raise ValueError("chain length must be >= 1")
    if M > 1 and spacing >= 2 * r:
        raise GeometryError(f"spacing {spacing} >= 2r = {2 * r}: consecutive balls do not overlap (the union must be connected through overlaps)")
    x = spacing * (np.arange(M) - (M - 1) / 2)
    centers = np.column_stack([x, np.zeros(M), np.zeros(M)])
    return BallUnion.from_arrays(centers, np.full(M, float(r)), sphere_samples)


def parse_geometry(spec: str, sphere_samples: int = DEFAULT_SPHERE_SAMPLES) -> BallUnion:
    """Resolve ``lattice:nx,ny,nz[,r]``, ``chain:M[,spacing[,r]]`` or an xyzr path."""
    kind, sep, args = spec.partition(":")
    if sep and kind in ("lattice", "chain"):
        try:
            vals = [float(a) for a in args.split(",") if a.strip()]
        except ValueError:
            raise ValueError(f"bad generator spec {spec!r}: arguments must be numbers") from None
        if kind == "lattice":
            if len(vals) not in (3, 4) or any(v != int(v) for v in vals[:3]):
                raise ValueError(f"bad generator spec {spec!r}: expected lattice:nx,ny,nz[,r] with integer n")
            return lattice(*(int(v) for v in vals[:3]), *vals[3:], sphere_samples=sphere_samples)
        if len(vals) not in (1, 2, 3) or vals[0] != int(vals[0]):
            raise ValueError(f"bad generator spec {spec!r}: expected chain:M[,spacing[,r]] with integer M")
        return chain(int(vals[0]), *vals[1:], sphere_samples=sphere_samples)
    return load_xyzr(spec, sphere_samples)
