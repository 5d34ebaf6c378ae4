"""Non-negative (Tikhonov) least squares by the Lawson-Hanson active-set method."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lstsq

from .exceptions import ConvergenceError
from .regularization import stacked_system

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class NnlsSolution:
    x: np.ndarray
    active_set: np.ndarray  # indices held at zero
    iterations: int
    kkt_residual: float
    objective: float
    objective_history: tuple = field(default=(), repr=False)

    @property
    def passive_set(self):
        return np.flatnonzero(self.x > 0)


def _passive_lstsq(A, b, passive):
    z = np.zeros(A.shape[1])
    idx = np.flatnonzero(passive)
    if idx.size:
        z[idx] = lstsq(A[:, idx], b, lapack_driver="gelsy", check_finite=False)[0]
    return z


def kkt_residual(A, b, x):
    """Largest violation of the NNLS optimality conditions at ``x``.

    With ``g = A^T (A x - b)`` this is ``max(|g_i|)`` over positive components and
    ``max(-g_i)`` over components at zero; a negative entry of ``x`` counts as a
    primal violation.
    """
    g = A.T @ (A @ x - b)
    pos = x > 0
    viol = [np.abs(g[pos]).max(initial=0.0), np.maximum(-g[~pos], 0.0).max(initial=0.0)]
    viol.append(np.maximum(-x, 0.0).max(initial=0.0))
    return float(max(viol))


def nnls_solve(A, b, tol=DEFAULT_TOL, max_iter=None) -> NnlsSolution:
    """Solve ``min ||A x - b||`` subject to ``x >= 0``.

    Parameters
    ----------
    A : (m, n) array
    b : (m,) array
    tol : float
        Dual-feasibility tolerance relative to ``||A^T b||_inf``.
    max_iter : int, optional
        Limit on least-squares subproblem solves; ``10 * n`` by default.

    Returns
    -------
    NnlsSolution

    Raises
    ------
    ConvergenceError
        When the iteration limit is reached; the best iterate is attached.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"b has shape {b.shape}, expected ({m},)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * n

    atb = A.T @ b
    abs_tol = tol * max(np.abs(atb).max(initial=0.0), np.finfo(float).tiny)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    w = atb.copy()  # A^T (b - A x), the negative gradient
    iterations = 0
    history = [float(b @ b)]

    def failure():
        return ConvergenceError(
            f"NNLS did not converge in {max_iter} iterations",
            x=x.copy(), kkt_residual=kkt_residual(A, b, x), iterations=iterations,
        )

    while True:
        violating = ~passive & (w > abs_tol)
        if not violating.any():
            break
        candidates = violating & ~blocked
        if not candidates.any():
            # never stop on a blocked index alone
            candidates = violating
        if iterations >= max_iter:
            raise failure()
        # lowest index wins ties
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True
        blocked[:] = False

        z = _passive_lstsq(A, b, passive)
        iterations += 1
        if z[j] <= 0:
            # rounding made the entering variable non-positive; skip it this round
            passive[j] = False
            blocked[j] = True
            w[j] = 0.0
            continue

        while np.any(z[passive] <= 0):
            if iterations >= max_iter:
                raise failure()
            shrink = np.flatnonzero(passive & (z <= 0))
            ratios = x[shrink] / (x[shrink] - z[shrink])
            k = shrink[np.argmin(ratios)]
            x = x + ratios.min() * (z - x)
            floor = 10 * np.finfo(float).eps * np.abs(x).max(initial=0.0)
            leaving = passive & (x <= floor)
            leaving[k] = True
            passive &= ~leaving
            blocked |= leaving
            x[leaving] = 0.0
            z = _passive_lstsq(A, b, passive)
            iterations += 1

        x = z
        r = b - A @ x
        w = A.T @ r
        history.append(float(r @ r))

    r = A @ x - b
    return NnlsSolution(
        x=x,
        active_set=np.flatnonzero(x <= 0),
        iterations=iterations,
        kkt_residual=kkt_residual(A, b, x),
        objective=float(r @ r),
        objective_history=tuple(history),
    )


def tikhonov_nnls(A, b, lam, L=None, tol=DEFAULT_TOL, max_iter=None) -> NnlsSolution:
    """Minimise ``||A x - b||^2 + lam^2 ||L x||^2`` subject to ``x >= 0``."""
    K, rhs = stacked_system(A, b, lam, L)
    return nnls_solve(K, rhs, tol=tol, max_iter=max_iter)


def nnls_exhaustive(A, b):
    """Reference NNLS by enumeration of every support pattern.

    Each support gets an unconstrained least-squares solve restricted to its
    columns; feasible (non-negative) candidates compete on the objective.  Cost
    grows as ``2**n``, so this is for small verification problems only.

    Returns
    -------
    x : ndarray
    objective : float
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    best_x = np.zeros(n)
    best = float(b @ b)
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            cols = list(support)
            z, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            if np.any(z < 0):
                continue
            x = np.zeros(n)
            x[cols] = z
            r = A @ x - b
            obj = float(r @ r)
            if obj < best:
                best, best_x = obj, x
    return best_x, best
