"""Conjugate gradients, GMRES and Lanczos extreme eigenvalue estimates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import LinearOperator, aslinearoperator

log = logging.getLogger(__name__)


class IndefiniteError(ArithmeticError):
    pass


@dataclass
class KrylovReport:
    method: str
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    breakdown: str | None = None
    cond_estimate: float | None = None

    @property
    def rel_residual(self) -> float:
        return self.residuals[-1] / self.residuals[0] if self.residuals and self.residuals[0] else 0.0


def as_operator(A) -> LinearOperator:
    if callable(A) and not hasattr(A, "shape"):
        raise TypeError("pass a matrix or LinearOperator, not a bare callable")
    return aslinearoperator(A)


def cg(A, b, M=None, tol=1e-8, max_iters=500, x0=None, callback=None):
    """Preconditioned CG; stops on ||b - A x|| <= tol ||b||.

    The report carries a condition estimate from the Lanczos tridiagonal built
    from the CG coefficients.
    """
    A = as_operator(A)
    M = as_operator(M) if M is not None else None
    b = np.asarray(b, float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, float)
    r = b - A.matvec(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    rep = KrylovReport("cg", residuals=[np.linalg.norm(r)])
    if bnorm == 0:
        rep.converged = True
        return np.zeros_like(b), rep
    z = M.matvec(r) if M is not None else r
    p = z.copy()
    rz = r @ z
    alphas, betas = [], []
    for k in range(max_iters):
        if rep.residuals[-1] <= tol * bnorm:
            rep.converged = True
            break
        Ap = A.matvec(p)
        pAp = p @ Ap
        if pAp <= 0:
            raise IndefiniteError(f"p^T A p = {pAp:.3e} <= 0 at iteration {k}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rep.iterations = k + 1
        rep.residuals.append(np.linalg.norm(r))
        if callback is not None:
            callback(x)
        z = M.matvec(r) if M is not None else r
        rz_new = r @ z
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
        alphas.append(alpha)
        betas.append(beta)
    else:
        rep.converged = rep.residuals[-1] <= tol * bnorm
    if alphas:
        diag = np.empty(len(alphas))
        diag[0] = 1 / alphas[0]
        for k in range(1, len(alphas)):
            diag[k] = 1 / alphas[k] + betas[k - 1] / alphas[k - 1]
        off = np.sqrt(np.abs(betas[:-1])) / np.asarray(alphas[:-1])
        ev = eigh_tridiagonal(diag, off, eigvals_only=True)
        if ev[0] > 0:
            rep.cond_estimate = float(ev[-1] / ev[0])
    return x, rep


def gmres(A, b, M_right=None, tol=1e-8, max_iters=500, stagnation_window=20):
    """Right-preconditioned GMRES without restart, modified Gram-Schmidt.

    Residual norms in the report are those of the unpreconditioned system.
    """
    A = as_operator(A)
    Mr = as_operator(M_right) if M_right is not None else None
    b = np.asarray(b, float)
    n = b.shape[0]
    beta = np.linalg.norm(b)
    rep = KrylovReport("gmres", residuals=[beta])
    if beta == 0:
        rep.converged = True
        return np.zeros(n), rep
    m = min(max_iters, n)
    V = np.zeros((m + 1, n))
    Z = []
    H = np.zeros((m + 1, m))
    cs = np.zeros(m)
    sn = np.zeros(m)
    g = np.zeros(m + 1)
    g[0] = beta
    V[0] = b / beta
    k = 0
    for k in range(m):
        z = Mr.matvec(V[k]) if Mr is not None else V[k]
        Z.append(z)
        w = A.matvec(z)
        for j in range(k + 1):
            H[j, k] = w @ V[j]
            w = w - H[j, k] * V[j]
        H[k + 1, k] = np.linalg.norm(w)
        for j in range(k):
            t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        if denom == 0:
            rep.breakdown = "unhappy"
            break
        cs[k] = H[k, k] / denom
        sn[k] = H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        rep.iterations = k + 1
        rep.residuals.append(abs(g[k + 1]))
        if abs(g[k + 1]) <= tol * beta:
            rep.converged = True
            break
        hnext = np.linalg.norm(w)
        if hnext <= 1e-14 * beta:
            rep.breakdown = "happy"
            rep.converged = True
            break
        V[k + 1] = w / hnext
        if len(rep.residuals) > stagnation_window:
            old = rep.residuals[-stagnation_window - 1]
            if old > 0 and (old - rep.residuals[-1]) / old < 1e-14:
                rep.breakdown = "stagnation"
                break
    kk = rep.iterations
    y = np.linalg.solve(np.triu(H[:kk, :kk]), g[:kk]) if kk else np.zeros(0)
    x = np.zeros(n)
    for j in range(kk):
        x += y[j] * Z[j]
    true_res = np.linalg.norm(b - A.matvec(x))
    if true_res > tol * beta * 10 and rep.converged:
        log.warning("gmres: recurrence residual below tol but true residual %.3e", true_res / beta)
        rep.converged = False
    rep.residuals[-1] = true_res
    return x, rep


def lanczos_extremes(A, M=None, probes=3, iters=60, seed=0):
    """Extreme Ritz values of A, or of M A when a preconditioner M is given.

    M A is self-adjoint in the A inner product, so the recurrence runs in that
    inner product; full reorthogonalization. Returns the mean over ``probes``
    random starts of (smallest, largest) Ritz value.
    """
    A = as_operator(A)
    M = as_operator(M) if M is not None else None
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    lo, hi = [], []
    attempts = 0
    while len(lo) < probes:
        attempts += 1
        if attempts > 4 * probes:
            raise ArithmeticError("lanczos: repeated breakdown")
        q = rng.standard_normal(n)
        theta = _lanczos_run(A, M, q, min(iters, n))
        if theta is None:
            continue
        lo.append(theta[0])
        hi.append(theta[-1])
    return float(np.mean(lo)), float(np.mean(hi))


def _lanczos_run(A, M, q, iters):
    def op(v):
        Av = A.matvec(v)
        return (M.matvec(Av) if M is not None else Av), Av

    def ip(u, Au):
        return u @ Au if M is not None else u @ u

    Aq = A.matvec(q)
    nq = np.sqrt(ip(q, Aq)) if M is not None else np.linalg.norm(q)
    if nq == 0:
        return None
    Q, AQ = [q / nq], [Aq / nq]
    alpha, beta = [], []
    for k in range(iters):
        w, _ = op(Q[k])
        a = (w @ AQ[k]) if M is not None else w @ Q[k]
        alpha.append(a)
        Aw = A.matvec(w) if M is not None else None
        before = np.sqrt(max(w @ Aw, 0.0)) if M is not None else np.linalg.norm(w)
        for _ in range(2):
            for j in range(len(Q)):
                c = (w @ AQ[j]) if M is not None else w @ Q[j]
                w = w - c * Q[j]
        if M is not None:
            # recomputed rather than updated: the updated product loses the
            # small remainder to cancellation once the Krylov space saturates
            Aw = A.matvec(w)
        bnorm = np.sqrt(max(w @ Aw, 0.0)) if M is not None else np.linalg.norm(w)
        if k == iters - 1 or bnorm <= 1e-8 * max(before, 1e-300):
            break
        beta.append(bnorm)
        Q.append(w / bnorm)
        AQ.append(Aw / bnorm if M is not None else w / bnorm)
    if not alpha:
        return None
    return eigh_tridiagonal(np.array(alpha), np.array(beta[:len(alpha) - 1]), eigvals_only=True)


def inverse_power_min(solve, apply, n, iters=200, tol=1e-10, seed=0):
    """Smallest eigenvalue of an SPD operator by inverse iteration with Rayleigh quotients."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = np.inf
    for _ in range(iters):
        y = solve(x)
        y /= np.linalg.norm(y)
        new = float(y @ apply(y))
        x = y
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    return lam
