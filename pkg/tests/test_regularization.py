import numpy as np
import pytest

from drtinv.exceptions import SingularSystemError
from drtinv.kernels import build_matrix
from drtinv.models import ProcessMix, RQProcess
from drtinv.param_choice import lambda_grid_default
from drtinv.regularization import (
    make_smoothing, picard_data, picard_growth_index, svd, tikhonov_filter_solution, tikhonov_solve,
)
from drtinv.simulate import add_noise, exact_impedance


def test_make_smoothing_shapes():
    assert np.array_equal(make_smoothing(0, 3), np.eye(3))
    assert np.array_equal(make_smoothing(1, 3), [[-1, 1, 0], [0, -1, 1]])
    assert make_smoothing(2, 6).shape == (4, 6)
    x = 3.0 * np.arange(10) - 2.0
    assert np.abs(make_smoothing(2, 10) @ x).max() < 1e-12
    assert np.abs(make_smoothing(1, 10) @ np.ones(10)).max() == 0
    with pytest.raises(ValueError):
        make_smoothing(2, 2)
    with pytest.raises(ValueError):
        make_smoothing(3, 10)


def test_tikhonov_identity():
    x = tikhonov_solve(np.eye(3), np.array([1.0, 2.0, 3.0]), 1.0)
    assert x == pytest.approx([0.5, 1.0, 1.5])


def test_tikhonov_unregularised(rng):
    A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
    b = rng.standard_normal(6)
    assert np.allclose(tikhonov_solve(A, b, 0.0), np.linalg.solve(A, b), rtol=1e-12)


def test_tikhonov_large_lambda(rng):
    A = rng.standard_normal((8, 5))
    b = rng.standard_normal(8)
    lam = 1e8
    # rounding in the stacked QR costs a few ulps relative to lam
    assert np.linalg.norm(tikhonov_solve(A, b, lam)) <= np.linalg.norm(A.T @ b) / lam**2 * (1 + 1e-6)


def test_tikhonov_singular():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularSystemError):
        tikhonov_solve(A, np.ones(2), 0.0)
    # the constant vector lies in the null space of both A-column difference and L1
    with pytest.raises(SingularSystemError):
        tikhonov_solve(np.array([[1.0, -1.0]]), np.ones(1), 1.0, make_smoothing(1, 2))


def test_stationarity_on_kernel(freq):
    A = build_matrix("A4s", freq).entries
    rng = np.random.default_rng(1)
    b = rng.standard_normal(A.shape[0])
    L = make_smoothing(1, A.shape[1])
    for lam in (1e-3, 1e-1, 10.0):
        x = tikhonov_solve(A, b, lam, L)
        g = A.T @ (A @ x - b) + lam**2 * L.T @ (L @ x)
        assert np.linalg.norm(g) < 1e-8 * np.linalg.norm(A, 2) * np.linalg.norm(b)


def test_filter_factor_agreement(freq):
    A = build_matrix("A1s", freq).entries
    b = np.random.default_rng(2).standard_normal(A.shape[0])
    dec = svd(A)
    for lam in (1e-3, 1e-2, 1.0):
        x1 = tikhonov_solve(A, b, lam)
        x2 = tikhonov_filter_solution(A, b, lam, dec)
        assert np.linalg.norm(x1 - x2) <= 1e-8 * np.linalg.norm(x2)


def test_solution_finite_across_grid(freq):
    A = build_matrix("A4s", freq).entries
    b = np.random.default_rng(3).standard_normal(A.shape[0])
    L = make_smoothing(2, A.shape[1])
    xs = np.array([tikhonov_solve(A, b, lam, L) for lam in lambda_grid_default()])
    assert np.all(np.isfinite(xs))


def test_svd_invariants(freq):
    A = build_matrix("A3s", freq).entries
    d = svd(A)
    assert np.all(np.diff(d.s) <= 0) and np.all(d.s >= 0)
    assert np.abs(d.u.T @ d.u - np.eye(d.u.shape[1])).max() < 1e-10
    assert np.abs(d.v.T @ d.v - np.eye(d.v.shape[1])).max() < 1e-10
    assert np.abs(d.u * d.s @ d.vt - A).max() < 1e-10 * d.s[0]
    assert svd(np.eye(65)).condition == 1.0


def test_picard_single_component(rng):
    A = rng.standard_normal((10, 6))
    d = svd(A)
    data = picard_data(A, 3.0 * d.u[:, 0])
    assert len(data) == 6
    assert data.coef[0] == pytest.approx(3.0)
    assert np.all(data.coef[1:] < 1e-12)


def test_picard_growth_index(freq):
    A = build_matrix("A1s", freq).entries
    _, z1, _ = exact_impedance(ProcessMix((RQProcess(1e-2, 0.8),)), freq)
    idx = [picard_growth_index(picard_data(A, add_noise(z1, 1e-3, seed).b)) for seed in range(10)]
    assert all(abs(i - 28) <= 5 for i in idx)


def test_picard_csv(tmp_path, rng):
    A = rng.standard_normal((7, 4))
    data = picard_data(A, rng.standard_normal(7))
    data.to_csv(tmp_path / "p.csv")
    rows = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
    assert rows.shape == (4, 4)
    assert np.array_equal(rows[:, 0], np.arange(1, 5))
