"""Discretised kernel matrices for the impedance integral.

The kernel ``h(omega, t) = 1 / (1 + i omega t)`` is split as ``h1 - i h2``; in s = ln t
the imaginary part is ``h2(omega, e^s) = omega e^s / (1 + omega^2 e^(2s))``.  Matrices
are built on a log-time grid ``s_n`` that is, by default, reciprocal to the
measured angular frequencies.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError


def kernel_real(omega, t):
    """``h1 = 1 / (1 + (omega t)^2)``."""
    with np.errstate(over="ignore"):
        x = np.multiply(omega, t, dtype=float)
        return 1.0 / (1.0 + x * x)


def kernel_imag(omega, t):
    """``h2 = omega t / (1 + (omega t)^2)``, evaluated without overflow for large ``omega t``."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        x = np.asarray(np.multiply(omega, t, dtype=float))
        big = x > 1.0
        out = np.where(big, 1.0 / (x + 1.0 / x), x / (1.0 + x * x))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FrequencyGrid:
    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).copy()
        if w.ndim != 1 or w.size < 1:
            raise ValueError("omegas must be a non-empty 1-D array")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("omegas must be positive and strictly increasing")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def log_spaced(cls, omega_min=1e-2, omega_max=1e5, m=65):
        return cls(np.logspace(np.log10(omega_min), np.log10(omega_max), m))

    def __len__(self):
        return self.omegas.size

    def drop_first(self):
        return FrequencyGrid(self.omegas[1:])


@dataclass(frozen=True)
class SGrid:
    """Uniform grid in log-time ``s``; ``t_n = exp(s_n)``."""

    s_values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_values, dtype=float).copy()
        if s.ndim != 1 or s.size < 2:
            raise ValueError("an s-grid needs at least two nodes")
        d = np.diff(s)
        if np.any(d <= 0) or np.ptp(d) > 1e-12 * max(1.0, abs(d[0])) + 1e-12:
            raise ValueError("s-grid must be equally spaced and increasing")
        s.setflags(write=False)
        object.__setattr__(self, "s_values", s)

    @classmethod
    def linspace(cls, s_first, s_last, n):
        return cls(np.linspace(s_first, s_last, n))

    @classmethod
    def from_times(cls, t_min, t_max, n):
        return cls.linspace(np.log(t_min), np.log(t_max), n)

    @property
    def delta_s(self) -> float:
        s = self.s_values
        return float((s[-1] - s[0]) / (s.size - 1))

    @property
    def t_values(self) -> np.ndarray:
        return np.exp(self.s_values)

    @property
    def span(self) -> float:
        return float(self.s_values[-1] - self.s_values[0])

    def __len__(self):
        return self.s_values.size


class QuadratureRule(str, enum.Enum):
    TRAP_T = "trap_t"  # trapezoid in t on log-spaced nodes; unknowns are g(t_n)
    TRAP_S = "trap_s"  # trapezoid in s, end weights halved
    EXTENDED_S = "extended_s"  # trapezoid in s, end weights not halved
    TAIL_CORRECTED_S = "tail_corrected_s"  # TRAP_S plus analytic kernel tails

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            raise ConfigurationError(f"unknown quadrature rule {value!r}") from None


KERNEL_TAGS = ("h1", "h2", "stacked")


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    kernel_tag: str
    rule: QuadratureRule
    freq: FrequencyGrid
    sgrid: SGrid

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def shape(self):
        return self.entries.shape

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.entries:
                writer.writerow([f"{v:.17e}" for v in row])


def reciprocal_grid(freq: FrequencyGrid, n_points) -> SGrid:
    """Uniform s-grid from ``ln(1/omega_max)`` to ``ln(1/omega_min)``."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    w = freq.omegas
    return SGrid.linspace(-np.log(w[-1]), -np.log(w[0]), n_points)


def trapezoid_t_weights(sgrid: SGrid):
    """Trapezoid weights in ``t`` for the log-spaced nodes ``t_n = exp(s_n)``."""
    t = sgrid.t_values
    a = np.empty_like(t)
    a[0] = 0.5 * (t[1] - t[0])
    a[-1] = 0.5 * (t[-1] - t[-2])
    a[1:-1] = 0.5 * (t[2:] - t[:-2])
    return a


def trapezoid_s_weights(sgrid: SGrid, halve_ends=True):
    w = np.full(len(sgrid), sgrid.delta_s)
    if halve_ends:
        w[[0, -1]] *= 0.5
    return w


def tail_corrections(omega, sgrid: SGrid, kernel):
    """Boundary-column additions ``(r_{k,1}, r_{k,N})`` for each ``omega``.

    Right tails and the left ``h2`` tail are the kernel integrated analytically
    beyond the grid; the left ``h1`` tail assumes the integrand vanishes one step
    before ``s_1``.
    """
    omega = np.asarray(omega, dtype=float)
    x1 = omega * np.exp(sgrid.s_values[0])
    xn = omega * np.exp(sgrid.s_values[-1])
    if kernel in (1, "h1"):
        r_first = 0.5 * sgrid.delta_s * kernel_real(x1, 1.0)
        with np.errstate(divide="ignore"):
            r_last = 0.5 * np.log1p(1.0 / (xn * xn))
    elif kernel in (2, "h2"):
        r_first = np.arctan(x1)
        r_last = np.pi / 2.0 - np.arctan(xn)
    else:
        raise ConfigurationError(f"unknown kernel {kernel!r}")
    return r_first, r_last


def _kernel_block(freq, sgrid, tag, rule):
    w = freq.omegas[:, None]
    t = sgrid.t_values[None, :]
    h = kernel_real(w, t) if tag == "h1" else kernel_imag(w, t)
    if rule is QuadratureRule.TRAP_T:
        return h * trapezoid_t_weights(sgrid)
    if rule is QuadratureRule.EXTENDED_S:
        return h * trapezoid_s_weights(sgrid, halve_ends=False)
    a = h * trapezoid_s_weights(sgrid)
    if rule is QuadratureRule.TAIL_CORRECTED_S:
        r_first, r_last = tail_corrections(freq.omegas, sgrid, tag)
        a[:, 0] += r_first
        a[:, -1] += r_last
    return a


def assemble(freq: FrequencyGrid, sgrid: SGrid, kernel_tag="h1", rule=QuadratureRule.TRAP_S):
    """Kernel matrix for one of ``h1``, ``h2`` or ``stacked`` (``[h1; h2]``).

    For the ``TRAP_T`` rule the unknowns are ``g(t_n)``; for all s-rules they are
    ``f(s_n) = t_n g(t_n)``.
    """
    rule = QuadratureRule.parse(rule)
    if kernel_tag not in KERNEL_TAGS:
        raise ConfigurationError(f"unknown kernel tag {kernel_tag!r}")
    if kernel_tag == "stacked":
        a = np.vstack([_kernel_block(freq, sgrid, "h1", rule), _kernel_block(freq, sgrid, "h2", rule)])
    else:
        a = _kernel_block(freq, sgrid, kernel_tag, rule)
    return KernelMatrix(a, kernel_tag, rule, freq, sgrid)


def stack(a1: KernelMatrix, a2: KernelMatrix) -> KernelMatrix:
    if a1.shape[1] != a2.shape[1]:
        raise ValueError(f"column mismatch: {a1.shape[1]} vs {a2.shape[1]}")
    if not np.array_equal(a1.sgrid.s_values, a2.sgrid.s_values):
        raise ValueError("matrices are built on different s-grids")
    if a1.rule is not a2.rule:
        raise ValueError("matrices use different quadrature rules")
    return KernelMatrix(np.vstack([a1.entries, a2.entries]), "stacked", a1.rule, a1.freq, a1.sgrid)


def square_system(freq: FrequencyGrid, rule=QuadratureRule.TAIL_CORRECTED_S) -> KernelMatrix:
    """Stacked ``2M x 2M`` system on a reciprocal s-grid refined to ``2M`` nodes."""
    sgrid = reciprocal_grid(freq, 2 * len(freq))
    return assemble(freq, sgrid, "stacked", rule)


MATRIX_NAMES = ("A1", "A2", "A3", "A4", "A1s", "A2s", "A3s", "A4s")


def build_matrix(name, freq: FrequencyGrid, rule=None) -> KernelMatrix:
    """Named system matrix: ``A1..A4`` use the t-rule, ``A1s..A4s`` an s-rule.

    ``rule`` only applies to the s-matrices and defaults to the tail-corrected rule.
    """
    if name not in MATRIX_NAMES:
        raise ConfigurationError(f"unknown matrix {name!r}; choose from {', '.join(MATRIX_NAMES)}")
    if name.endswith("s"):
        rule = QuadratureRule.parse(rule or QuadratureRule.TAIL_CORRECTED_S)
        if rule is QuadratureRule.TRAP_T:
            raise ConfigurationError("s-matrices need an s-space rule")
    else:
        rule = QuadratureRule.TRAP_T
    kind = name[:2]
    m = len(freq)
    if kind == "A4":
        return square_system(freq, rule)
    sgrid = reciprocal_grid(freq, m)
    tag = {"A1": "h1", "A2": "h2", "A3": "stacked"}[kind]
    return assemble(freq, sgrid, tag, rule)
