"""Truncated distance functions and the partition of unity theta_i = delta_i / delta."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BallUnion, inside_ball


class DomainError(ValueError):
    """Point outside the open union, where theta is undefined."""


@dataclass
class PouValue:
    point: np.ndarray
    active: np.ndarray
    delta_i: np.ndarray
    delta: float
    theta: np.ndarray
    grad_theta: np.ndarray


def _ball_hits(centers, radii, pts: np.ndarray):
    """Yield (i, point indices strictly inside ball i, offsets x - m_i, norms)."""
    tree = cKDTree(pts)
    for i, (c, r) in enumerate(zip(centers, radii)):
        idx = tree.query_ball_point(c, r)
        if not idx:
            continue
        idx = np.asarray(idx)
        inside = inside_ball(pts[idx], c, r)
        idx = idx[inside]
        off = pts[idx] - c
        yield i, idx, off, np.linalg.norm(off, axis=1)


def delta_total(union: BallUnion, pts) -> np.ndarray:
    """delta(x) = sum_i max(0, R_i - |x - m_i|) at each row of ``pts``."""
    pts = np.atleast_2d(np.asarray(pts, float))
    out = np.zeros(len(pts))
    for i, idx, _, nrm in _ball_hits(union.centers, union.radii, pts):
        out[idx] += union.radii[i] - nrm
    return out


def delta_matrix(union: BallUnion, pts) -> np.ndarray:
    """Dense (N, M) array of delta_i values."""
    pts = np.atleast_2d(np.asarray(pts, float))
    out = np.zeros((len(pts), union.M))
    for i, idx, _, nrm in _ball_hits(union.centers, union.radii, pts):
        out[idx, i] = union.radii[i] - nrm
    return out


def theta_and_grad(union: BallUnion, pts):
    """theta (N, M), grad theta (N, M, 3) and delta (N,) at points inside the union.

    grad delta_j = -(x - m_j)/|x - m_j| inside ball j (zero at the center) and
    grad theta_i = grad delta_i / delta - theta_i * sum_j grad delta_j / delta.
    """
    return _theta_grad(union.centers, union.radii, pts)


def _theta_grad(centers, radii, pts):
    pts = np.atleast_2d(np.asarray(pts, float))
    n = len(pts)
    d = np.zeros((n, len(radii)))
    gd = np.zeros((n, len(radii), 3))
    for i, idx, off, nrm in _ball_hits(centers, radii, pts):
        d[idx, i] = radii[i] - nrm
        safe = np.where(nrm > 0, nrm, 1.0)
        gd[idx, i] = np.where(nrm[:, None] > 0, -off / safe[:, None], 0.0)
    delta = d.sum(1)
    if np.any(delta <= 0):
        bad = pts[np.flatnonzero(delta <= 0)[0]]
        raise DomainError(f"point {bad} is not inside the ball union (delta = 0)")
    theta = d / delta[:, None]
    gsum = gd.sum(1)
    grad = gd / delta[:, None, None] - theta[:, :, None] * (gsum / delta[:, None])[:, None, :]
    return theta, grad, delta


def eval_delta(union: BallUnion, x) -> tuple[np.ndarray, float]:
    x = np.asarray(x, float).reshape(1, 3)
    di = delta_matrix(union, x)[0]
    return di, float(di.sum())


def eval_theta(union: BallUnion, x) -> PouValue:
    x = np.asarray(x, float).reshape(3)
    theta, grad, delta = theta_and_grad(union, x[None, :])
    di = theta[0] * delta[0]
    active = np.flatnonzero(di > 0)
    return PouValue(x, active, di[active], float(delta[0]), theta[0, active], grad[0, active])


def theta_column(union: BallUnion, i: int, pts, delta=None) -> np.ndarray:
    """theta_i at ``pts``; ``delta`` may carry precomputed delta values."""
    pts = np.atleast_2d(np.asarray(pts, float))
    if delta is None:
        delta = delta_total(union, pts)
    pos = inside_ball(pts, union.centers[i], union.radii[i])
    out = np.zeros(len(pts))
    out[pos] = (union.radii[i] - np.linalg.norm(pts[pos] - union.centers[i], axis=1)) / delta[pos]
    return out


def theta_energy_on_grid(union: BallUnion, i: int, h: float) -> float:
    """Midpoint rule for the integral of |grad theta_i|^2 over ball i.

    Cells tile the bounding cube of ball i, so halving ``h`` nests the cells.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    c, r = union.centers[i], union.radii[i]
    n = max(1, int(np.ceil(2 * r / h)))
    lo = c - 0.5 * n * h
    ax = lo[0] + h * (np.arange(n) + 0.5)
    ay = lo[1] + h * (np.arange(n) + 0.5)
    az = lo[2] + h * (np.arange(n) + 0.5)
    nbrs = union.neighbors[i]
    k = int(np.flatnonzero(nbrs == i)[0])
    total = 0.0
    for ix in range(n):
        X, Y, Z = np.meshgrid(ax[ix:ix + 1], ay, az, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
        pts = pts[inside_ball(pts, c, r)]
        if len(pts) == 0:
            continue
        _, grad, _ = _theta_grad(union.centers[nbrs], union.radii[nbrs], pts)
        total += float(np.sum(grad[:, k] ** 2))
    return total * h ** 3
