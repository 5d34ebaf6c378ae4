"""Synthetic two- and three-process benchmark datasets and seeded noise."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .kernels import FrequencyGrid
from .models import LNProcess, ProcessMix, RQProcess, z_numeric, z_rq_analytic

NOISE_LEVELS = (1e-3, 1e-2, 5e-2)
DEFAULT_NOISE = 1e-3


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    t0: tuple
    beta: tuple
    sigma: tuple
    alpha: tuple

    def __post_init__(self):
        lengths = {len(self.t0), len(self.beta), len(self.sigma), len(self.alpha)}
        if len(lengths) != 1:
            raise ValueError(f"dataset {self.name}: parameter lists differ in length")
        if abs(sum(self.alpha) - 1.0) > 1e-12:
            raise ValueError(f"dataset {self.name}: weights do not sum to one")

    def mix(self, model) -> ProcessMix:
        model = model.upper()
        if model == "RQ":
            procs = [RQProcess(t, b, a) for t, b, a in zip(self.t0, self.beta, self.alpha)]
        elif model == "LN":
            procs = [LNProcess.centered(t, s, a) for t, s, a in zip(self.t0, self.sigma, self.alpha)]
        else:
            raise ConfigurationError(f"unknown model {model!r}; use RQ or LN")
        return ProcessMix(tuple(procs), r0=0.0, rpol=1.0)


DATASETS = {
    "A": DatasetSpec(
        "A", t0=(10**-3.5, 10**0.5), beta=(0.8, 0.8),
        sigma=(np.log(2), np.log(2)), alpha=(0.5, 0.5),
    ),
    "B": DatasetSpec(
        "B", t0=(10**-1.5, 10**-0.5), beta=(0.7, 0.8),
        sigma=(np.log(2.4), np.log(2)), alpha=(0.35, 0.65),
    ),
    "C": DatasetSpec(
        "C", t0=(1e-3, 1.0, 10.0), beta=(0.8, 0.7, 0.7),
        sigma=(np.log(2), np.log(2.1), np.log(2.2)), alpha=(0.6, 0.2, 0.2),
    ),
}
MODELS = ("RQ", "LN")


def dataset(name, model):
    """Process mix for dataset ``name`` under ``model`` together with its s-space truth."""
    try:
        spec = DATASETS[str(name).upper()]
    except KeyError:
        raise ConfigurationError(f"unknown dataset {name!r}; choose from A, B, C") from None
    mix = spec.mix(model)
    return mix, mix.f


def default_frequencies(drop_first=False) -> FrequencyGrid:
    freq = FrequencyGrid.log_spaced(1e-2, 1e5, 65)
    return freq.drop_first() if drop_first else freq


def exact_impedance(mix: ProcessMix, freq: FrequencyGrid | None = None, drop_first=False):
    """Noise-free ``(freq, Z1, Z2)`` with ``Z = Z1 - i Z2``.

    RQ-only mixes use the closed form; anything containing a log-normal process
    goes through adaptive quadrature.
    """
    if freq is None:
        freq = default_frequencies(drop_first)
    elif drop_first:
        freq = freq.drop_first()
    w = freq.omegas
    if all(isinstance(p, RQProcess) for p in mix.processes):
        z = mix.r0 + mix.rpol * sum(z_rq_analytic(w, p) for p in mix.processes)
    else:
        z = z_numeric(mix, w)
    return freq, z.real.copy(), -z.imag


@dataclass(frozen=True)
class NoisyMeasurement:
    b: np.ndarray
    eta: float
    seed: int
    exact: np.ndarray


def add_noise(exact, eta, seed) -> NoisyMeasurement:
    """``exact + eta * e`` with ``e`` standard normal from a PCG64 stream seeded by ``seed``."""
    exact = np.asarray(exact, dtype=float)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if eta == 0:
        return NoisyMeasurement(exact.copy(), 0.0, seed, exact)
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(exact.shape)
    return NoisyMeasurement(exact + eta * e, float(eta), seed, exact)


def stacked_data(z1, z2):
    return np.concatenate([np.asarray(z1, float), np.asarray(z2, float)])


def write_impedance_csv(path, freq: FrequencyGrid, z1, z2):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "Z1", "Z2"])
        for row in zip(freq.omegas, z1, z2):
            w.writerow([f"{v:.17e}" for v in row])


def write_truth_csv(path, s, f):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "f"])
        for row in zip(s, f):
            w.writerow([f"{v:.17e}" for v in row])
