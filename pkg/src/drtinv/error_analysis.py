"""Model-error and conditioning diagnostics for the discretised impedance integral.

Covers truncation of the RQ density, combined truncation/quadrature bounds for the
tail-corrected rule, quadrature-error curves against adaptive quadrature,
condition-number tables and frequency content of singular vectors.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.signal import find_peaks

from .exceptions import DomainError
from .kernels import (
    FrequencyGrid, QuadratureRule, SGrid, assemble, build_matrix, kernel_imag, kernel_real,
)
from .models import ProcessMix, RQProcess, kernel_integrand, s_integral, z_numeric
from .param_choice import ncp
from .regularization import svd


# -- truncation of the RQ density --------------------------------------------

def rq_upper_tail(s_high, t0, beta):
    """Mass of the unit RQ density above ``s_high`` (closed form)."""
    x = np.tan(np.pi * beta / 2) * np.tanh(beta * (s_high - np.log(t0)) / 2)
    return 0.5 - np.arctan(x) / (np.pi * beta)


def rq_lower_tail(s_low, t0, beta):
    """Mass of the unit RQ density below ``s_low`` (closed form)."""
    x = np.tan(np.pi * beta / 2) * np.tanh(beta * (s_low - np.log(t0)) / 2)
    return 0.5 + np.arctan(x) / (np.pi * beta)


@dataclass(frozen=True)
class TruncationBound:
    delta: float
    epsilon: float
    s_low: float
    s_high: float

    @property
    def required_range(self) -> float:
        return self.s_high - self.s_low


def rq_truncation(t0, beta, delta) -> TruncationBound:
    """Truncation points leaving at most ``delta`` RQ mass in each tail.

    ``epsilon`` is the density value at the truncation points, which bounds the
    density on both tails.
    """
    if not 0 < beta < 1:
        raise DomainError("beta must lie strictly between 0 and 1")
    if not 0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 0.5)")
    arg = np.tan(np.pi * beta * (1 - 2 * delta) / 2) / np.tan(np.pi * beta / 2)
    if not 0 <= arg < 1:
        raise DomainError(f"artanh argument {arg:.6g} outside [0, 1)")
    offset = 2.0 / beta * np.arctanh(arg)
    c = np.log(t0)
    eps = float(RQProcess(t0, beta).f(c + offset))
    return TruncationBound(float(delta), eps, float(c - offset), float(c + offset))


def rq_required_range(beta, delta):
    """Minimum ``s_N - s_1`` for total RQ truncation error below ``2 delta``."""
    arg = np.tan(np.pi * beta * (1 - 2 * delta) / 2) / np.tan(np.pi * beta / 2)
    return float(4.0 / beta * np.arctanh(arg))


def kernel_tail_bounds(omega, s1, sN, delta):
    """Upper bounds on the kernel-weighted truncation errors given tail masses below ``delta``.

    Returns ``(bound_h1, bound_h2)``; the ``h2`` bound is the sum of the left and
    right one-sided bounds, each at most ``delta / 2``.
    """
    omega = np.asarray(omega, dtype=float)
    x1 = omega * np.exp(s1)
    xn = omega * np.exp(sN)
    bound1 = delta * (1.0 + kernel_real(xn, 1.0))
    left = np.where(x1 < 1, delta * kernel_imag(x1, 1.0), delta / 2)
    right = np.where(xn >= 1, delta * kernel_imag(xn, 1.0), delta / 2)
    return bound1, left + right


# -- tail estimates and total error bounds -----------------------------------

@dataclass(frozen=True)
class TailEstimate:
    delta_f: float
    epsilon: float


def tail_sup(f, s1, sN, delta_s=0.0, probe=60.0):
    """Tail mass below ``s1 - delta_s`` and sup of ``|f|`` outside ``[s1, sN]``.

    The density must decrease monotonically away from the interval; this is
    checked on a probe grid reaching ``probe`` units beyond each end.
    """
    fl, fr = float(f(s1)), float(f(sN))
    inner = np.linspace(s1, sN, 2001)
    if np.argmax(f(inner)) in (0, inner.size - 1):
        raise DomainError("density peak is not inside (s1, sN)")
    left = f(np.linspace(s1 - probe, s1, 2001))
    right = f(np.linspace(sN, sN + probe, 2001))
    if np.any(np.diff(left) < -1e-15 * max(fl, 1e-300)) or np.any(np.diff(right) > 1e-15 * max(fr, 1e-300)):
        raise DomainError("density is not monotone on the tails")
    delta_f, _ = quad(f, -np.inf, s1 - delta_s, epsabs=0.0, epsrel=1e-10, limit=500)
    return TailEstimate(float(delta_f), max(fl, fr))


@dataclass(frozen=True)
class ErrorBoundReport:
    omega: np.ndarray
    e1_bound: np.ndarray
    e2_bound: np.ndarray
    h1_second_sup: np.ndarray
    h2_second_sup: np.ndarray
    epsilon: float
    delta_f: float
    zeta_note: str = (
        "the mean-value point of the second derivative is unknown; its sup over "
        "a 10x refined grid is used instead"
    )


def _second_derivative_sup(H, lo, hi, step):
    s = np.arange(lo, hi + 0.5 * step, step)
    d2 = (H(s + step) - 2 * H(s) + H(s - step)) / step**2
    return float(np.abs(d2).max())


def total_error_bounds(mix, sgrid: SGrid, omega) -> ErrorBoundReport:
    """Evaluate the combined truncation and quadrature bounds for the tail-corrected rule.

    For ``h2``: ``eps * pi + span^3 / (12 N^2) * sup|H2''|``.
    For ``h1``: ``eps / 2 * (ds + ln 2) + delta_f + span^3 (N + 1) / (12 N^3) * sup|H1''|``,
    where the ``h1`` sup also covers the extra step left of ``s_1``.
    """
    mix = _as_mix(mix)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    s = sgrid.s_values
    n, ds, span = len(sgrid), sgrid.delta_s, sgrid.span
    tails = tail_sup(mix.f, s[0], s[-1], ds)
    step = ds / 10.0
    sup1 = np.array([_second_derivative_sup(kernel_integrand(mix.f, w, 1), s[0] - ds, s[-1], step) for w in omega])
    sup2 = np.array([_second_derivative_sup(kernel_integrand(mix.f, w, 2), s[0], s[-1], step) for w in omega])
    eps = tails.epsilon
    e2 = eps * np.pi + span**3 / (12.0 * n**2) * sup2
    e1 = eps / 2.0 * (ds + np.log(2.0)) + tails.delta_f + span**3 * (n + 1) / (12.0 * n**3) * sup1
    return ErrorBoundReport(omega, e1, e2, sup1, sup2, eps, tails.delta_f)


# -- quadrature error curves ---------------------------------------------------

def _as_mix(obj):
    if isinstance(obj, ProcessMix):
        return obj
    return ProcessMix((obj,))


def quadrature_values(mix, freq: FrequencyGrid, sgrid: SGrid, rule, kernel):
    """Apply one kernel row per frequency to exact samples of the DRT."""
    mix = _as_mix(mix)
    rule = QuadratureRule.parse(rule)
    a = assemble(freq, sgrid, "h1" if kernel == 1 else "h2", rule).entries
    samples = mix.g(sgrid.t_values) if rule is QuadratureRule.TRAP_T else mix.f(sgrid.s_values)
    return a @ samples


def reference_values(mix, freq: FrequencyGrid, sgrid: SGrid, kernel, reference="truncated"):
    """Adaptive-quadrature reference over ``[s_1, s_N]`` or the whole real line."""
    mix = _as_mix(mix)
    if reference == "full":
        unit = ProcessMix(mix.processes, r0=0.0, rpol=1.0)
        z = z_numeric(unit, freq.omegas)
        return z.real if kernel == 1 else -z.imag
    if reference != "truncated":
        raise ValueError("reference must be 'truncated' or 'full'")
    lo, hi = sgrid.s_values[0], sgrid.s_values[-1]
    return np.array([
        s_integral(kernel_integrand(mix.f, w, kernel), lo, hi, list(mix.centers) + [-np.log(w)])
        for w in freq.omegas
    ])


def quad_error_curve(mix, freq: FrequencyGrid, sgrid: SGrid, rule, kernel, reference="truncated"):
    """Absolute quadrature error at each frequency.

    With ``reference="truncated"`` the rule is compared with the exact integral
    over the grid interval, isolating the quadrature error from truncation;
    ``"full"`` compares with the integral over the whole line.
    """
    q = quadrature_values(mix, freq, sgrid, rule, kernel)
    return np.abs(q - reference_values(mix, freq, sgrid, kernel, reference))


def write_error_curves(path, omega, columns: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", *columns])
        for i, om in enumerate(omega):
            w.writerow([f"{om:.17e}"] + [f"{columns[k][i]:.17e}" for k in columns])


# -- conditioning ----------------------------------------------------------------

TABLE4_RANGES = tuple((tmin, tmax) for tmin in (1e-6, 1e-5, 1e-4) for tmax in (1e1, 1e2, 1e3))


def condition_number(A) -> float:
    """``sigma_max / sigma_min``; ``inf`` when ``sigma_min`` underflows."""
    return svd(A).condition


def condition_table(freq: FrequencyGrid, t_ranges=TABLE4_RANGES, n=None):
    """Condition of the t- and s-trapezoid matrices for several time ranges.

    Returns a list of dicts with keys ``t_min, t_max, A1, A2, A1s, A2s``.
    """
    n = len(freq) if n is None else n
    rows = []
    for tmin, tmax in t_ranges:
        g = SGrid.from_times(tmin, tmax, n)
        row = {"t_min": tmin, "t_max": tmax}
        for name, tag, rule in (
            ("A1", "h1", QuadratureRule.TRAP_T), ("A2", "h2", QuadratureRule.TRAP_T),
            ("A1s", "h1", QuadratureRule.TRAP_S), ("A2s", "h2", QuadratureRule.TRAP_S),
        ):
            row[name] = condition_number(assemble(freq, g, tag, rule).entries)
        rows.append(row)
    return rows


def quadrature_condition_table(freq: FrequencyGrid):
    """Condition of ``A1..A4`` under each quadrature rule on the reciprocal grid."""
    rows = []
    for rule in QuadratureRule:
        row = {"rule": rule.value}
        for kind in ("A1", "A2", "A3", "A4"):
            name = kind if rule is QuadratureRule.TRAP_T else kind + "s"
            row[kind] = condition_number(build_matrix(name, freq, None if rule is QuadratureRule.TRAP_T else rule).entries)
        rows.append(row)
    return rows


def write_table_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in row.items()})


# -- singular-vector frequency content --------------------------------------------

@dataclass(frozen=True)
class BasisNcp:
    u_noise: np.ndarray
    v_noise: np.ndarray
    u_degenerate: np.ndarray
    v_degenerate: np.ndarray

    @staticmethod
    def _first(mask):
        hits = np.flatnonzero(mask)
        return int(hits[0]) + 1 if hits.size else None

    @property
    def first_noise_u(self):
        """1-based index of the first left singular vector that looks like white noise."""
        return self._first(self.u_noise)

    @property
    def first_noise_v(self):
        return self._first(self.v_noise)

    def __len__(self):
        return self.u_noise.size


def _classify(vectors, p):
    noise = np.zeros(vectors.shape[1], dtype=bool)
    degenerate = np.zeros(vectors.shape[1], dtype=bool)
    for i in range(vectors.shape[1]):
        try:
            noise[i] = ncp(vectors[:, i], p).passes
        except DomainError:
            degenerate[i] = True
    return noise, degenerate


def basis_ncp(A, p=0.05, columns=None) -> BasisNcp:
    """White-noise classification of each column of ``U`` and ``V`` from the SVD of ``A``.

    Columns whose spectrum carries no power away from zero frequency are
    flagged degenerate instead of being classified.
    """
    dec = svd(A)
    u, v = dec.u, dec.v
    if columns is not None:
        u, v = u[:, :columns], v[:, :columns]
    un, ud = _classify(u, p)
    vn, vd = _classify(v, p)
    return BasisNcp(un, vn, ud, vd)


# -- reconstruction shape -------------------------------------------------------

def peak_indices(x, rel_prominence=0.05):
    """Indices of local maxima of ``x`` whose prominence is at least
    ``rel_prominence * max(x)``.  The ends count as candidates, with the
    outside taken as zero."""
    x = np.asarray(x, dtype=float)
    top = x.max(initial=0.0)
    if top <= 0:
        return np.array([], dtype=int)
    idx, _ = find_peaks(np.r_[0.0, x, 0.0], prominence=rel_prominence * top)
    return idx - 1
