"""Regularisation-parameter choice: residual periodogram (NCP) test and L-curve corner.

Both criteria only need a solver that returns a solution for a given ``lam``, so
they apply unchanged to plain Tikhonov and to the non-negatively constrained
problem.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kstwo

from .exceptions import ConfigurationError, ConvergenceError, DomainError, SelectionError, SingularSystemError
from .nnls import tikhonov_nnls
from .regularization import tikhonov_solve

SOLVERS = ("lls", "nnls")


def lambda_grid_default(n=50, log_min=-3.5, log_max=1.5):
    """``n`` values log-spaced between ``10**log_min`` and ``10**log_max`` inclusive."""
    return np.logspace(log_min, log_max, n)


@dataclass(frozen=True)
class NcpCurve:
    """Normalised cumulative periodogram of a vector and its white-noise test.

    ``cumulative[j-1]`` is the share of power in frequency bins ``1..j``.  The DC
    bin and, for even lengths, the Nyquist bin are excluded so that every
    remaining periodogram ordinate has the same distribution under white noise.
    """

    cumulative: np.ndarray
    ks_statistic: float
    critical: float
    p: float

    @property
    def q(self) -> int:
        return self.cumulative.size

    @property
    def passes(self) -> bool:
        return bool(self.ks_statistic <= self.critical)


def ks_critical(n, p):
    """Critical Kolmogorov-Smirnov distance for ``n`` uniform samples at level ``p``."""
    if n < 1:
        return np.inf
    return float(kstwo(n).isf(p))


def ncp(residual, p=0.2) -> NcpCurve:
    """Residual periodogram test for whiteness at significance ``p``.

    Under white noise the first ``q - 1`` values of the cumulative periodogram
    behave like sorted uniform samples, so they are compared with the uniform CDF
    by the two-sided Kolmogorov-Smirnov distance and its exact finite-sample
    critical value.
    """
    r = np.asarray(residual, dtype=float).ravel()
    if r.size < 4:
        raise DomainError("residual must have at least 4 entries")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = (r.size - 1) // 2
    power = np.abs(np.fft.rfft(r)[1 : q + 1]) ** 2
    total = power.sum()
    if not total > 0:
        raise DomainError("vector has no power at non-zero frequencies")
    c = np.cumsum(power) / total
    c[-1] = 1.0
    n = q - 1
    if n >= 1:
        u = c[:n]
        j = np.arange(1, n + 1)
        ks = float(max((j / n - u).max(), (u - (j - 1) / n).max()))
    else:
        ks = 0.0
    return NcpCurve(c, ks, ks_critical(n, p), p)


def regularized_solve(A, b, lam, L=None, solver="lls"):
    if solver == "lls":
        return tikhonov_solve(A, b, lam, L)
    if solver == "nnls":
        return tikhonov_nnls(A, b, lam, L).x
    raise ValueError(f"unknown solver {solver!r}; use 'lls' or 'nnls'")


_SOLVER_FAILURES = (SingularSystemError, ConvergenceError, np.linalg.LinAlgError)


@dataclass
class NcpSelection:
    lam: float
    lambdas: np.ndarray
    ks: np.ndarray
    passes: np.ndarray
    no_pass: bool
    skipped: list = field(default_factory=list)


NCP_RULES = ("min_ks", "smallest_pass")


def choose_lambda_ncp(A, b, lambdas, L=None, solver="lls", p=0.2, rule="min_ks"):
    """Pick ``lam`` from the NCP of the data residual.

    ``rule="min_ks"`` returns the grid value whose residual is closest to white
    noise (smallest KS statistic).  ``rule="smallest_pass"`` returns the smallest
    value that passes the test at level ``p``, falling back to the KS minimiser.
    Either way ``no_pass`` is set when nothing passes.

    Returns
    -------
    lam : float
    diagnostics : NcpSelection
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    if rule not in NCP_RULES:
        raise ConfigurationError(f"unknown NCP rule {rule!r}; choose from {NCP_RULES}")
    ks = np.full(lambdas.size, np.nan)
    passes = np.zeros(lambdas.size, dtype=bool)
    skipped = []
    for i, lam in enumerate(lambdas):
        try:
            x = regularized_solve(A, b, lam, L, solver)
        except _SOLVER_FAILURES as exc:
            warnings.warn(f"solver failed at lambda={lam:.3g}: {exc}", RuntimeWarning, stacklevel=2)
            skipped.append(float(lam))
            continue
        curve = ncp(b - A @ x, p)
        ks[i] = curve.ks_statistic
        passes[i] = curve.passes
    return _pick_ncp(lambdas, ks, passes, skipped, rule)


def _pick_ncp(lambdas, ks, passes, skipped=(), rule="min_ks"):
    if np.all(np.isnan(ks)):
        raise SelectionError("solver failed at every lambda")
    if rule == "min_ks":
        lam, no_pass = lambdas[np.nanargmin(ks)], not passes.any()
    elif passes.any():
        lam, no_pass = lambdas[np.argmax(passes)], False
    else:
        lam, no_pass = lambdas[np.nanargmin(ks)], True
    return float(lam), NcpSelection(float(lam), lambdas, ks, passes, no_pass, list(skipped))


@dataclass(frozen=True)
class LCurvePoint:
    lam: float
    residual_norm: float
    seminorm: float


def _curvature(x, y):
    """Signed curvature of the circle through consecutive point triples.

    Positive values mark a counter-clockwise turn, which is the orientation of
    the L-curve corner when traversed with increasing ``lam``.
    """
    ax, ay = x[1:-1] - x[:-2], y[1:-1] - y[:-2]
    bx, by = x[2:] - x[1:-1], y[2:] - y[1:-1]
    cx, cy = x[2:] - x[:-2], y[2:] - y[:-2]
    cross = ax * by - ay * bx
    denom = np.hypot(ax, ay) * np.hypot(bx, by) * np.hypot(cx, cy)
    return 2.0 * cross / denom


def lcurve_corner(points):
    """``lam`` at the point of maximum curvature of the log-log L-curve.

    Points are sorted by ``lam``; points with a non-positive norm, or that break
    the expected monotonicity (residual non-decreasing, seminorm non-increasing),
    are pruned before the curvature is evaluated.
    """
    pts = sorted(points, key=lambda pt: pt.lam)
    kept = []
    for pt in pts:
        if not (pt.residual_norm > 0 and pt.seminorm > 0):
            continue
        if not (np.isfinite(pt.residual_norm) and np.isfinite(pt.seminorm)):
            continue
        if kept:
            last = kept[-1]
            if pt.residual_norm < last.residual_norm or pt.seminorm > last.seminorm:
                continue
            if pt.residual_norm == last.residual_norm and pt.seminorm == last.seminorm:
                continue
        kept.append(pt)
    if len(kept) < 3:
        raise SelectionError(f"L-curve has only {len(kept)} usable points; need 3")
    x = np.log([pt.residual_norm for pt in kept])
    y = np.log([pt.seminorm for pt in kept])
    kappa = _curvature(x, y)
    return float(kept[1 + int(np.argmax(kappa))].lam)


@dataclass
class SweepResult:
    """Per-realisation, per-lambda record of a regularisation sweep.

    Array fields are indexed ``[realization, lambda]``; failed cells hold NaN.
    """

    lambdas: np.ndarray
    seeds: list
    error: np.ndarray
    resid_norm: np.ndarray
    seminorm: np.ndarray
    ks: np.ndarray
    passes: np.ndarray
    solutions: np.ndarray | None
    p: float
    labels: dict = field(default_factory=dict)
    ncp_rule: str = "min_ks"

    @property
    def ok(self):
        return ~np.isnan(self.error)

    @property
    def success_rate(self) -> float:
        return float(self.ok.mean())

    @property
    def mean_error(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(self.error, axis=0)

    @property
    def lam_opt(self):
        err = np.where(self.ok, self.error, np.inf)
        return self.lambdas[np.argmin(err, axis=1)]

    @property
    def lam_ncp(self):
        return np.array([
            _pick_ncp(self.lambdas, self.ks[r], self.passes[r], rule=self.ncp_rule)[0] for r in range(len(self.seeds))
        ])

    @property
    def lam_lc(self):
        out = []
        for r in range(len(self.seeds)):
            pts = [
                LCurvePoint(lam, rn, sn)
                for lam, rn, sn, ok in zip(self.lambdas, self.resid_norm[r], self.seminorm[r], self.ok[r])
                if ok
            ]
            try:
                out.append(lcurve_corner(pts))
            except SelectionError:
                out.append(np.nan)
        return np.array(out)

    @staticmethod
    def _geomean(values):
        v = np.asarray(values, dtype=float)
        v = v[np.isfinite(v) & (v > 0)]
        return float(np.exp(np.log(v).mean())) if v.size else float("nan")

    def summary(self) -> dict:
        lam_opt, lam_ncp, lam_lc = self.lam_opt, self.lam_ncp, self.lam_lc
        mean_err = self.mean_error
        return {
            **self.labels,
            "p": self.p,
            "ncp_rule": self.ncp_rule,
            "lambdas": self.lambdas.tolist(),
            "mean_error": [None if np.isnan(e) else float(e) for e in mean_err],
            "lambda_opt": lam_opt.tolist(),
            "lambda_ncp": lam_ncp.tolist(),
            "lambda_lc": [None if np.isnan(v) else float(v) for v in lam_lc],
            "markers": {
                "lambda_opt_min": float(self.lambdas[np.nanargmin(mean_err)]),
                "geomean_lambda_ncp": self._geomean(lam_ncp),
                "geomean_lambda_lc": self._geomean(lam_lc),
            },
            "success_rate": self.success_rate,
        }

    CSV_COLUMNS = (
        "dataset", "model", "matrix", "L_order", "solver", "realization",
        "lambda", "resid_norm", "seminorm", "s_error", "ks_stat", "passes",
    )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for r, seed in enumerate(self.seeds):
                for i, lam in enumerate(self.lambdas):
                    w.writerow([
                        self.labels.get("dataset", ""), self.labels.get("model", ""),
                        self.labels.get("matrix", ""), self.labels.get("L_order", ""),
                        self.labels.get("solver", ""), seed, f"{lam:.17e}",
                        f"{self.resid_norm[r, i]:.17e}", f"{self.seminorm[r, i]:.17e}",
                        f"{self.error[r, i]:.17e}", f"{self.ks[r, i]:.17e}", int(self.passes[r, i]),
                    ])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def _sweep_row(A, b, lambdas, L, solver, truth, weight, p, keep):
    n_lam = lambdas.size
    row = {k: np.full(n_lam, np.nan) for k in ("error", "resid", "semi", "ks")}
    row["passes"] = np.zeros(n_lam, dtype=bool)
    row["x"] = np.full((n_lam, A.shape[1]), np.nan) if keep else None
    Lm = np.eye(A.shape[1]) if L is None else L
    for i, lam in enumerate(lambdas):
        try:
            x = regularized_solve(A, b, lam, L, solver)
        except _SOLVER_FAILURES:
            continue
        r = b - A @ x
        curve = ncp(r, p)
        row["error"][i] = weight * np.abs(x - truth).sum()
        row["resid"][i] = np.linalg.norm(r)
        row["semi"][i] = np.linalg.norm(Lm @ x)
        row["ks"][i] = curve.ks_statistic
        row["passes"][i] = curve.passes
        if keep:
            row["x"][i] = x
    return row


def sweep(A, realizations, lambdas, truth, L=None, solver="nnls", error_weight=1.0,
          p=0.2, seeds=None, keep_solutions=False, n_jobs=1, labels=None,
          ncp_rule="min_ks") -> SweepResult:
    """Solve every ``(realization, lam)`` cell and record norms, NCP and error.

    The error against ``truth`` is the weighted discrete L1 distance
    ``error_weight * sum(|x - truth|)``; pass ``delta_s`` as the weight for
    s-space solutions.  Cells are independent, so ``n_jobs > 1`` farms
    realisations out with joblib without changing the result.
    """
    A = np.asarray(A, dtype=float)
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (A.shape[1],):
        raise ValueError(f"truth has shape {truth.shape}, expected ({A.shape[1]},)")
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    if ncp_rule not in NCP_RULES:
        raise ConfigurationError(f"unknown NCP rule {ncp_rule!r}; choose from {NCP_RULES}")
    bs = [np.asarray(b, dtype=float) for b in realizations]
    args = (lambdas, L, solver, truth, error_weight, p, keep_solutions)
    if n_jobs == 1:
        rows = [_sweep_row(A, b, *args) for b in bs]
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(delayed(_sweep_row)(A, b, *args) for b in bs)
    result = SweepResult(
        lambdas=lambdas,
        seeds=list(seeds) if seeds is not None else list(range(len(bs))),
        error=np.array([r["error"] for r in rows]),
        resid_norm=np.array([r["resid"] for r in rows]),
        seminorm=np.array([r["semi"] for r in rows]),
        ks=np.array([r["ks"] for r in rows]),
        passes=np.array([r["passes"] for r in rows]),
        solutions=np.array([r["x"] for r in rows]) if keep_solutions else None,
        p=p,
        labels=dict(labels or {}),
        ncp_rule=ncp_rule,
    )
    if solver == "lls" and L is None:
        check_filter_monotonicity(result)
    return result


def check_filter_monotonicity(result: SweepResult, rtol=1e-8):
    """Plain Tikhonov with ``L = I``: residual norms must not decrease and solution
    norms must not increase along the lambda grid."""
    for r in range(len(result.seeds)):
        rho, eta = result.resid_norm[r], result.seminorm[r]
        ok = ~np.isnan(rho)
        rho, eta = rho[ok], eta[ok]
        if np.any(np.diff(rho) < -rtol * rho[1:]) or np.any(np.diff(eta) > rtol * eta[:-1]):
            raise RuntimeError(f"filter-factor monotonicity violated for realization {result.seeds[r]}")


def mean_error_at(A, realizations, lam, truth, L=None, solver="nnls", error_weight=1.0):
    """Mean weighted L1 error over realisations when every one is solved at ``lam``."""
    errs = [
        error_weight * np.abs(regularized_solve(A, b, lam, L, solver) - truth).sum()
        for b in realizations
    ]
    return float(np.mean(errs))
