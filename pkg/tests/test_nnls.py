import numpy as np
import pytest

from drtinv.exceptions import ConvergenceError
from drtinv.kernels import build_matrix
from drtinv.nnls import kkt_residual, nnls_exhaustive, nnls_solve, tikhonov_nnls
from drtinv.regularization import make_smoothing, stacked_system, tikhonov_solve
from drtinv.simulate import add_noise, dataset, exact_impedance, stacked_data


def test_projection_case():
    sol = nnls_solve(np.eye(2), np.array([1.0, -1.0]))
    assert np.array_equal(sol.x, [1.0, 0.0])
    assert list(sol.active_set) == [1]


def test_interior_case():
    assert nnls_solve(np.array([[1.0], [1.0]]), np.array([1.0, 1.0])).x == pytest.approx([1.0])


def test_random_against_brute_force(rng):
    for _ in range(30):
        A = rng.standard_normal((8, 5))
        b = rng.standard_normal(8)
        _, best = nnls_exhaustive(A, b)
        assert nnls_solve(A, b).objective == pytest.approx(best, abs=1e-9)


def test_tikhonov_nnls_cases(rng):
    A = rng.standard_normal((7, 4))
    b = rng.standard_normal(7)
    assert np.array_equal(tikhonov_nnls(A, b, 0.0).x, nnls_solve(A, b).x)
    x = tikhonov_nnls(np.eye(3), np.array([2.0, -2.0, 4.0]), 1.0).x
    assert x == pytest.approx([1.0, 0.0, 2.0])
    for _ in range(10):
        A = rng.standard_normal((10, 6))
        b = rng.standard_normal(10)
        L = make_smoothing(1, 6)
        for lam in (0.1, 1.0):
            K, rhs = stacked_system(A, b, lam, L)
            _, best = nnls_exhaustive(K, rhs)
            assert tikhonov_nnls(A, b, lam, L).objective == pytest.approx(best, abs=1e-9)


def test_kkt_and_monotone_objective(freq):
    mix, _ = dataset("B", "RQ")
    _, z1, z2 = exact_impedance(mix, freq)
    A = build_matrix("A4s", freq).entries
    b = add_noise(stacked_data(z1, z2), 1e-3, 0).b
    L = make_smoothing(1, A.shape[1])
    for lam in (1e-3, 3e-2, 1.0):
        sol = tikhonov_nnls(A, b, lam, L)
        K, rhs = stacked_system(A, b, lam, L)
        assert sol.kkt_residual <= 1e-10 * np.abs(K.T @ rhs).max()
        assert np.all(sol.x >= 0)
        assert np.all(np.diff(sol.objective_history) <= 1e-12 * sol.objective_history[0])


def test_unconstrained_solution_returned_when_feasible(rng):
    A = rng.uniform(0.5, 1.0, (12, 5))
    x_true = rng.uniform(1.0, 2.0, 5)
    b = A @ x_true + 1e-3 * rng.standard_normal(12)
    L = make_smoothing(1, 5)
    x_ls = tikhonov_solve(A, b, 0.1, L)
    assert np.all(x_ls > 0)
    assert np.allclose(tikhonov_nnls(A, b, 0.1, L).x, x_ls, atol=1e-8)


def test_deterministic(rng):
    A = rng.standard_normal((30, 20))
    b = rng.standard_normal(30)
    assert np.array_equal(nnls_solve(A, b).x, nnls_solve(A, b).x)


def test_iteration_limit(rng):
    A = rng.standard_normal((30, 20))
    b = rng.standard_normal(30)
    with pytest.raises(ConvergenceError) as info:
        nnls_solve(A, b, max_iter=1)
    assert info.value.x is not None and info.value.kkt_residual > 0


def test_kkt_residual_flags_violations():
    A, b = np.eye(2), np.array([1.0, -1.0])
    assert kkt_residual(A, b, np.array([1.0, 0.0])) == 0.0
    assert kkt_residual(A, b, np.array([0.0, 0.0])) == pytest.approx(1.0)
    assert kkt_residual(A, b, np.array([1.0, -0.5])) >= 0.5


def test_bad_input():
    with pytest.raises(ValueError):
        nnls_solve(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        nnls_solve(np.eye(2), np.ones(2), tol=0)
