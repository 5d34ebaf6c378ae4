"""Tikhonov-regularised least squares, difference operators and SVD diagnostics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import SingularSystemError


def make_smoothing(order, n):
    """Unscaled difference operator of ``order`` 0, 1 or 2 with shape ``(n - order, n)``.

    >>> make_smoothing(1, 3)
    array([[-1.,  1.,  0.],
           [ 0., -1.,  1.]])
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order!r}")
    if n <= order:
        raise ValueError(f"need n > order, got n={n}, order={order}")
    return np.diff(np.eye(n), n=order, axis=0)


def stacked_system(A, b, lam, L=None):
    """Augmented pair ``([A; lam L], [b; 0])`` whose plain least-squares solution
    is the Tikhonov solution."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if L is None:
        L = np.eye(A.shape[1])
    L = np.asarray(L, dtype=float)
    if A.shape[0] != b.shape[0] or L.shape[1] != A.shape[1]:
        raise ValueError(f"inconsistent shapes A{A.shape}, b{b.shape}, L{L.shape}")
    if lam == 0:
        return A, b
    return np.vstack([A, lam * L]), np.concatenate([b, np.zeros(L.shape[0])])


def tikhonov_solve(A, b, lam, L=None, rcond=None):
    """Minimise ``||A x - b||^2 + lam^2 ||L x||^2`` via QR of the stacked system.

    Parameters
    ----------
    A : (m, n) array
    b : (m,) array
    lam : float
        Regularisation parameter, ``lam >= 0``.
    L : (p, n) array, optional
        Regularisation operator; identity when omitted.
    rcond : float, optional
        Relative threshold on the diagonal of the triangular factor below which
        the system is declared singular. Defaults to machine epsilon.

    Raises
    ------
    SingularSystemError
        If the stacked matrix is numerically rank deficient.
    """
    K, rhs = stacked_system(A, b, lam, L)
    if K.shape[0] < K.shape[1]:
        raise SingularSystemError("stacked system has fewer rows than unknowns")
    Q, R = np.linalg.qr(K)
    d = np.abs(np.diag(R))
    tol = (np.finfo(float).eps if rcond is None else rcond) * d.max(initial=0.0)
    if not d.size or d.max() == 0 or d.min() <= tol:
        raise SingularSystemError(
            f"stacked system is rank deficient (min |R_ii| = {d.min(initial=0.0):.3g})"
        )
    return solve_triangular(R, Q.T @ rhs)


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def v(self):
        return self.vt.T

    @property
    def condition(self) -> float:
        smin = self.s[-1]
        if smin < np.finfo(float).tiny:
            return np.inf
        return float(self.s[0] / smin)


def svd(A) -> SvdResult:
    u, s, vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    return SvdResult(u, s, vt)


def tikhonov_filter_solution(A, b, lam, decomposition: SvdResult | None = None):
    """Standard-form Tikhonov solution from filter factors ``s / (s^2 + lam^2)``."""
    dec = decomposition or svd(A)
    beta = dec.u.T @ np.asarray(b, dtype=float)
    return dec.vt.T @ (dec.s / (dec.s**2 + lam**2) * beta)


@dataclass(frozen=True)
class PicardData:
    sigma: np.ndarray
    coef: np.ndarray
    ratio: np.ndarray

    def __len__(self):
        return self.sigma.size

    def __iter__(self):
        return iter(zip(self.sigma, self.coef, self.ratio))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "sigma", "coef", "ratio"])
            for i, row in enumerate(self, start=1):
                w.writerow([i] + [f"{v:.17e}" for v in row])


def picard_data(A, b) -> PicardData:
    """Singular values, ``|u_i^T b|`` and their ratio, in singular-value order."""
    dec = svd(A)
    coef = np.abs(dec.u.T @ np.asarray(b, dtype=float))
    with np.errstate(divide="ignore"):
        ratio = np.where(dec.s > 0, coef / np.where(dec.s > 0, dec.s, 1.0), np.inf)
    return PicardData(dec.s, coef, ratio)


def picard_growth_index(data: PicardData):
    """1-based index from which the Picard ratios keep growing.

    The coefficient noise floor is estimated as the median of ``|u_i^T b|`` over
    the trailing half of the spectrum.  Once ``sigma_i`` drops below that floor
    the coefficients no longer decay with it and the ratios grow; the first such
    index is returned (``len(sigma) + 1`` if it never happens).
    """
    floor = np.median(data.coef[data.coef.size // 2:])
    below = np.flatnonzero(data.sigma < floor)
    return int(below[0]) + 1 if below.size else data.sigma.size + 1
