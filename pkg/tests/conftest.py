import functools

import numpy as np
import pytest

from drtinv.kernels import build_matrix
from drtinv.param_choice import lambda_grid_default, sweep
from drtinv.regularization import make_smoothing
from drtinv.simulate import add_noise, dataset, default_frequencies, exact_impedance, stacked_data

SEEDS = tuple(range(50))
ETA = 1e-3

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def a4s_problem(name, model):
    mix, f = dataset(name, model)
    freq, z1, z2 = exact_impedance(mix)
    kernel = build_matrix("A4s", freq)
    exact = stacked_data(z1, z2)
    bs = tuple(add_noise(exact, ETA, s).b for s in SEEDS)
    return kernel, bs, f(kernel.sgrid.s_values)


@functools.lru_cache(maxsize=None)
def full_sweep(name, model, solver):
    """50 realisations x 50 lambdas on A_4^s with L_1 at 0.1% noise (cached per session)."""
    kernel, bs, truth = a4s_problem(name, model)
    return sweep(
        kernel.entries, bs, lambda_grid_default(), truth,
        L=make_smoothing(1, kernel.shape[1]), solver=solver,
        error_weight=kernel.sgrid.delta_s, seeds=SEEDS, keep_solutions=True,
        labels={"dataset": name, "model": model, "matrix": "A4s", "L_order": 1, "solver": solver},
    )


@pytest.fixture(scope="session")
def freq():
    return default_frequencies()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
