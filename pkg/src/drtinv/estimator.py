"""scikit-learn style estimator wrapping kernel assembly, regularisation and parameter choice."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConfigurationError, SelectionError
from .kernels import FrequencyGrid, assemble, build_matrix
from .param_choice import (
    _SOLVER_FAILURES, NCP_RULES, SOLVERS, LCurvePoint, choose_lambda_ncp, lambda_grid_default, lcurve_corner, ncp,
    regularized_solve,
)
from .regularization import make_smoothing

SELECTIONS = ("fixed", "ncp", "lcurve")


def data_vector(matrix, z1, z2):
    """Right-hand side matching the rows of ``matrix``."""
    kind = matrix[:2]
    if kind == "A1":
        return np.asarray(z1, dtype=float)
    if kind == "A2":
        return np.asarray(z2, dtype=float)
    return np.concatenate([np.asarray(z1, float), np.asarray(z2, float)])


class DRTRegressor(RegressorMixin, BaseEstimator):
    """Recover a relaxation-time distribution from impedance samples.

    ``X`` holds angular frequencies, shape ``(n, 1)``; ``y`` holds ``[Z1, Z2]``
    per row with ``Z = Z1 - i Z2``.  After fitting, ``distribution_`` holds the
    solution on the nodes ``s_`` (``f(s)`` for s-matrices, ``g(t)`` for the
    t-matrices ``A1``..``A4``) and ``predict`` maps frequencies back to
    ``[Z1, Z2]`` through the same quadrature.

    Parameters
    ----------
    matrix : str
        One of ``A1``..``A4`` or ``A1s``..``A4s``.
    rule : str
        s-space quadrature rule; ignored for the t-matrices.
    order : int
        Order of the difference operator used as penalty.
    solver : {"lls", "nnls"}
    selection : {"fixed", "ncp", "lcurve"}
    lam : float
        Regularisation parameter when ``selection="fixed"``.
    lambdas : array-like, optional
        Candidate grid for ``ncp`` and ``lcurve``; 50 log-spaced values by default.
    p : float
        Significance level of the residual white-noise test.
    ncp_rule : {"min_ks", "smallest_pass"}
    """

    def __init__(self, matrix="A4s", rule="tail_corrected_s", order=1, solver="nnls",
                 selection="ncp", lam=None, lambdas=None, p=0.2, ncp_rule="min_ks"):
        self.matrix = matrix
        self.rule = rule
        self.order = order
        self.solver = solver
        self.selection = selection
        self.lam = lam
        self.lambdas = lambdas
        self.p = p
        self.ncp_rule = ncp_rule

    def _check_params(self):
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.selection not in SELECTIONS:
            raise ConfigurationError(f"unknown selection {self.selection!r}")
        if self.ncp_rule not in NCP_RULES:
            raise ConfigurationError(f"unknown NCP rule {self.ncp_rule!r}")
        if self.selection == "fixed" and (self.lam is None or self.lam < 0):
            raise ConfigurationError("selection='fixed' needs a non-negative lam")
        if not 0 < self.p < 1:
            raise ConfigurationError("p must lie in (0, 1)")

    def fit(self, X, y):
        self._check_params()
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"X must have one column of frequencies, got {X.shape[1]}")
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValueError(f"y must have two columns [Z1, Z2], got shape {y.shape}")
        w = X.ravel()
        order = np.argsort(w)
        freq = FrequencyGrid(w[order])
        y = y[order]

        rule = self.rule if self.matrix.endswith("s") else None
        kernel = build_matrix(self.matrix, freq, rule)
        A = kernel.entries
        b = data_vector(self.matrix, y[:, 0], y[:, 1])
        L = make_smoothing(self.order, A.shape[1])

        self.selection_ = None
        if self.selection == "fixed":
            lam = float(self.lam)
        else:
            grid = lambda_grid_default() if self.lambdas is None else np.asarray(self.lambdas, float)
            if self.selection == "ncp":
                lam, self.selection_ = choose_lambda_ncp(A, b, grid, L, self.solver, self.p, self.ncp_rule)
            else:
                lam = self._lcurve(A, b, grid, L)

        x = regularized_solve(A, b, lam, L, self.solver)
        r = b - A @ x
        self.kernel_ = kernel
        self.s_ = kernel.sgrid.s_values
        self.distribution_ = x
        self.lambda_ = lam
        self.residual_norm_ = float(np.linalg.norm(r))
        self.seminorm_ = float(np.linalg.norm(L @ x))
        self.ncp_ = ncp(r, self.p) if r.size >= 4 else None
        self.n_features_in_ = 1
        return self

    def _lcurve(self, A, b, grid, L):
        points = []
        for lam in grid:
            try:
                x = regularized_solve(A, b, lam, L, self.solver)
            except _SOLVER_FAILURES:
                continue
            points.append(LCurvePoint(float(lam), float(np.linalg.norm(b - A @ x)), float(np.linalg.norm(L @ x))))
        if not points:
            raise SelectionError("solver failed at every lambda")
        return lcurve_corner(points)

    def predict(self, X):
        check_is_fitted(self, "distribution_")
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError(f"X must have one column of frequencies, got {X.shape[1]}")
        w = X.ravel()
        order = np.argsort(w)
        freq = FrequencyGrid(w[order])
        rule = self.kernel_.rule
        sgrid = self.kernel_.sgrid
        z1 = assemble(freq, sgrid, "h1", rule).entries @ self.distribution_
        z2 = assemble(freq, sgrid, "h2", rule).entries @ self.distribution_
        out = np.empty((w.size, 2))
        out[order, 0] = z1
        out[order, 1] = z2
        return out
