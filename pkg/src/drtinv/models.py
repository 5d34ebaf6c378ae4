"""Closed-form DRT densities and impedances for RQ (Cole-Cole) and log-normal processes.

A DRT is represented either in relaxation time ``t`` as ``g(t)`` or in log-time
``s = ln t`` as ``f(s) = t g(t)``.  Impedances follow the sign convention
``Z = Z1 - i Z2`` so that both components are non-negative for a non-negative DRT.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import quad

from .exceptions import DomainError, QuadratureError
from .kernels import kernel_imag, kernel_real

# relative density level used to truncate the infinite s-range for oracles
_SUPPORT_LEVEL = 1e-16
_ORACLE_EPSABS = 1e-13
_ORACLE_TOL = 1e-12


def _positive_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(~np.isfinite(t)):
        raise DomainError("relaxation time must be positive and finite")
    return t


@dataclass(frozen=True)
class RQProcess:
    """Cole-Cole (RQ / ZARC) process with characteristic time ``t0`` and shape ``beta``."""

    t0: float
    beta: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.t0 > 0:
            raise DomainError(f"t0 must be positive, got {self.t0}")
        if not 0 < self.beta <= 1:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")

    @property
    def center(self) -> float:
        return float(np.log(self.t0))

    def f(self, s):
        return f_rq(s, self)

    def g(self, t):
        return g_rq(t, self)

    def halfwidth(self, level=_SUPPORT_LEVEL) -> float:
        """Distance from the peak in ``s`` at which the density drops to ``level`` x peak."""
        c = np.cos(self.beta * np.pi)
        target = (1.0 + c) / level - c
        return float(np.arccosh(max(target, 1.0)) / self.beta)


@dataclass(frozen=True)
class LNProcess:
    """Log-normal process: a Gaussian in ``s`` with mean ``mu`` and spread ``sigma``."""

    mu: float
    sigma: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be non-negative, got {self.alpha}")

    @classmethod
    def centered(cls, t0, sigma, alpha=1.0):
        """Process whose s-space peak sits at ``ln t0`` (``mu = ln t0``)."""
        return cls(float(np.log(t0)), sigma, alpha)

    @classmethod
    def from_mode(cls, t0, sigma, alpha=1.0):
        """Process whose t-space mode sits at ``t0`` (``ln t0 = mu - sigma**2``)."""
        return cls(float(np.log(t0) + sigma**2), sigma, alpha)

    @property
    def center(self) -> float:
        return self.mu

    @property
    def mode_time(self) -> float:
        """Maximiser of ``g(t)``; differs from ``exp(mu)`` by ``exp(-sigma**2)``."""
        return float(np.exp(self.mu - self.sigma**2))

    def f(self, s):
        return f_ln(s, self)

    def g(self, t):
        return g_ln(t, self)

    def halfwidth(self, level=_SUPPORT_LEVEL) -> float:
        return float(self.sigma * np.sqrt(-2.0 * np.log(level)))


Process = Union[RQProcess, LNProcess]


@dataclass(frozen=True)
class ProcessMix:
    """Weighted sum of processes plus the series and polarisation resistances."""

    processes: tuple = field(default_factory=tuple)
    r0: float = 0.0
    rpol: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "processes", tuple(self.processes))
        if not self.processes:
            raise DomainError("a mix needs at least one process")

    @property
    def total_weight(self) -> float:
        return float(sum(p.alpha for p in self.processes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.total_weight - 1.0) <= 1e-12

    @property
    def centers(self) -> list:
        return [p.center for p in self.processes]

    def f(self, s):
        s = np.asarray(s, dtype=float)
        return sum(p.f(s) for p in self.processes)

    def g(self, t):
        t = _positive_time(t)
        return self.f(np.log(t)) / t

    def support(self, level=_SUPPORT_LEVEL):
        """s-interval outside which every component is below ``level`` x its peak."""
        lo = min(p.center - p.halfwidth(level) for p in self.processes)
        hi = max(p.center + p.halfwidth(level) for p in self.processes)
        return lo, hi


def g_rq(t, p: RQProcess):
    t = _positive_time(t)
    return f_rq(np.log(t), p) / t


def f_rq(s, p: RQProcess):
    s = np.asarray(s, dtype=float)
    bp = p.beta * np.pi
    if p.beta == 1.0:
        # delta limit: zero away from t0
        return np.where(s == np.log(p.t0), np.inf, 0.0) * p.alpha
    x = p.beta * (s - np.log(p.t0))
    # cosh overflows far in the tails; the density is zero there to double precision
    with np.errstate(over="ignore"):
        den = np.cosh(x) + np.cos(bp)
    return p.alpha * np.sin(bp) / (2.0 * np.pi * den)


def f_ln(s, p: LNProcess):
    s = np.asarray(s, dtype=float)
    z = (s - p.mu) / p.sigma
    return p.alpha * np.exp(-0.5 * z * z) / (p.sigma * np.sqrt(2.0 * np.pi))


def g_ln(t, p: LNProcess):
    t = _positive_time(t)
    return f_ln(np.log(t), p) / t


def z_rq_analytic(omega, p: RQProcess):
    """Impedance ``alpha / (1 + (i omega t0)**beta)`` on the principal branch."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("omega must be non-negative")
    mag = (omega * p.t0) ** p.beta
    phase = p.beta * np.pi / 2.0
    return p.alpha / (1.0 + mag * np.cos(phase) + 1j * mag * np.sin(phase))


def beta_for_sigma(sigma):
    """RQ shape whose s-space peak height equals that of a log-normal with spread ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    out = (2.0 / np.pi) * np.arctan(np.sqrt(2.0 * np.pi) / sigma * np.exp(-0.5 * sigma**2))
    return float(out) if out.ndim == 0 else out


def s_integral(func, lo, hi, points=(), epsabs=_ORACLE_EPSABS, tol=_ORACLE_TOL):
    """Adaptive Gauss-Kronrod integral of ``func`` over ``[lo, hi]``.

    Raises :class:`QuadratureError` when the error estimate exceeds ``tol``.
    """
    pts = sorted(x for x in points if lo < x < hi)
    val, err = quad(func, lo, hi, points=pts or None, epsabs=epsabs, epsrel=1e-13, limit=2000)
    if not err <= tol:
        raise QuadratureError(
            f"adaptive quadrature reached only {err:.3g} (requested {tol:.1g})", achieved=err
        )
    return val


def kernel_integrand(f, omega, kernel):
    """s-space integrand ``h_k(omega, e^s) f(s)`` for ``kernel`` in {1, 2}."""

    if kernel == 1:
        def integrand(s):
            return f(s) * kernel_real(omega, np.exp(s))
    elif kernel == 2:
        def integrand(s):
            return f(s) * kernel_imag(omega, np.exp(s))
    else:
        raise ValueError(f"kernel must be 1 or 2, got {kernel!r}")
    return integrand


def z_numeric(mix: ProcessMix, omega, level=_SUPPORT_LEVEL):
    """Impedance of an arbitrary mix by adaptive quadrature in s-space.

    Integrates over the interval where the density exceeds ``level`` x peak,
    breaking the range at each process centre and at ``s = -ln(omega)``.
    Used as the reference for every quadrature-error study.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega < 0):
        raise DomainError("omega must be non-negative")
    lo, hi = mix.support(level)
    out = np.empty(omega.shape, dtype=complex)
    for i, w in enumerate(omega):
        pts = list(mix.centers)
        if w > 0:
            pts.append(-np.log(w))
        z1 = s_integral(kernel_integrand(mix.f, w, 1), lo, hi, pts)
        z2 = s_integral(kernel_integrand(mix.f, w, 2), lo, hi, pts) if w > 0 else 0.0
        out[i] = complex(z1, -z2)
    return mix.r0 + mix.rpol * out

