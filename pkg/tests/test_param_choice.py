import json

import numpy as np
import pytest

from conftest import a4s_problem, full_sweep
from drtinv.exceptions import ConfigurationError, DomainError, SelectionError
from drtinv.kernels import build_matrix
from drtinv.param_choice import (
    LCurvePoint, SweepResult, check_filter_monotonicity, choose_lambda_ncp, ks_critical,
    lambda_grid_default, lcurve_corner, mean_error_at, ncp, sweep,
)
from drtinv.regularization import make_smoothing
from drtinv.simulate import add_noise, dataset, exact_impedance, stacked_data


def test_lambda_grid():
    g = lambda_grid_default()
    assert g.size == 50
    assert g[0] == pytest.approx(10**-3.5) and g[-1] == pytest.approx(10**1.5)
    r = g[1:] / g[:-1]
    assert np.abs(r / r[0] - 1).max() < 1e-12


def test_ncp_sinusoid_fails():
    m, k0 = 130, 10
    x = np.sin(2 * np.pi * k0 * np.arange(m) / m)
    c = ncp(x, 0.2)
    assert c.cumulative[-1] == 1.0
    assert np.all(c.cumulative[: k0 - 1] < 1e-20) and np.all(c.cumulative[k0 - 1:] > 1 - 1e-12)
    n = c.q - 1
    assert c.ks_statistic == pytest.approx(max(k0 - 1, n - k0 + 1) / n, rel=1e-12)
    assert not c.passes


def test_ncp_invariants(rng):
    for m in (4, 5, 64, 129, 130):
        c = ncp(rng.standard_normal(m))
        assert c.cumulative[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(c.cumulative) >= 0)
        assert c.ks_statistic >= 0
        assert c.q == (m - 1) // 2


def test_ncp_excludes_dc(rng):
    r = rng.standard_normal(64)
    assert ncp(r).ks_statistic == pytest.approx(ncp(r + 5.0).ks_statistic, rel=1e-12)


def test_ncp_domain():
    with pytest.raises(DomainError):
        ncp(np.ones(3))
    with pytest.raises(DomainError):
        ncp(np.ones(20))


def test_ks_critical_monotone():
    assert ks_critical(64, 0.05) > ks_critical(64, 0.2)
    assert ks_critical(64, 0.2) * np.sqrt(64) == pytest.approx(1.07, abs=0.03)


@pytest.mark.parametrize("rule", ["min_ks", "smallest_pass"])
def test_choose_ncp_noiseless(rule):
    mix, f = dataset("A", "LN")
    freq, _, _ = exact_impedance(mix)
    kernel = build_matrix("A4s", freq)
    b = kernel.entries @ f(kernel.sgrid.s_values)
    lam, diag = choose_lambda_ncp(kernel.entries, b, [1e-12, 1e-1, 1.0, 10.0], solver="lls", rule=rule)
    assert lam == 1e-12
    assert np.argmin(diag.ks) == 0


def test_choose_ncp_rules_and_grid_membership(rng):
    kernel, bs, _ = a4s_problem("A", "LN")
    L = make_smoothing(1, kernel.shape[1])
    grid = lambda_grid_default(12)
    for rule in ("min_ks", "smallest_pass"):
        lam, diag = choose_lambda_ncp(kernel.entries, bs[0], grid, L, "lls", rule=rule)
        assert lam in grid
        if diag.passes.any():
            i = int(np.flatnonzero(grid == lam)[0])
            assert diag.passes[i]
    with pytest.raises(ConfigurationError):
        choose_lambda_ncp(kernel.entries, bs[0], grid, L, "lls", rule="median")


def test_choose_ncp_all_fail():
    A = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
    with pytest.warns(RuntimeWarning):
        with pytest.raises(SelectionError):
            choose_lambda_ncp(A, np.arange(4.0), [0.0], solver="lls")


@pytest.mark.slow
def test_choose_ncp_rq_a_quality():
    res = full_sweep("A", "RQ", "nnls")
    lam_opt = res.lambdas[np.nanargmin(res.mean_error)]
    lam_ncp = res.summary()["markers"]["geomean_lambda_ncp"]
    assert 0.1 <= lam_ncp / lam_opt <= 10
    i = int(np.argmin(np.abs(np.log(res.lambdas / lam_ncp))))
    assert res.mean_error[i] <= 2 * np.nanmin(res.mean_error)
    kernel, bs, _ = a4s_problem("A", "RQ")
    lam0, _ = choose_lambda_ncp(kernel.entries, bs[0], res.lambdas, make_smoothing(1, 130), "nnls")
    assert lam0 == res.lam_ncp[0]


def test_lcurve_exact_l_shape():
    lams = np.logspace(-3, 3, 13)
    pts = []
    for i, lam in enumerate(lams):
        # vertical leg then horizontal leg in log-log, joint at index 6
        rho = 1.0 if i <= 6 else 10.0 ** (i - 6)
        eta = 10.0 ** (6 - i) if i <= 6 else 1.0
        pts.append(LCurvePoint(lam, rho, eta))
    assert lcurve_corner(pts) == lams[6]
    shuffled = [pts[i] for i in np.random.default_rng(0).permutation(len(pts))]
    assert lcurve_corner(shuffled) == lams[6]


def test_lcurve_too_few_points():
    with pytest.raises(SelectionError):
        lcurve_corner([LCurvePoint(1.0, 1.0, 1.0), LCurvePoint(2.0, 2.0, 0.5)])
    with pytest.raises(SelectionError):
        lcurve_corner([LCurvePoint(1.0, 1.0, 1.0), LCurvePoint(2.0, 0.5, 2.0), LCurvePoint(3.0, 0.1, 3.0)])


def test_lcurve_lls_identity_rq_a():
    mix, f = dataset("A", "RQ")
    freq, z1, z2 = exact_impedance(mix)
    kernel = build_matrix("A4s", freq)
    bs = [add_noise(stacked_data(z1, z2), 1e-3, s).b for s in range(10)]
    res = sweep(kernel.entries, bs, lambda_grid_default(), f(kernel.sgrid.s_values), solver="lls",
                error_weight=kernel.sgrid.delta_s)
    lam_opt = res.lambdas[np.nanargmin(res.mean_error)]
    lam_lc = res.summary()["markers"]["geomean_lambda_lc"]
    assert 0.1 <= lam_lc / lam_opt <= 10


def test_sweep_singleton(tmp_path):
    mix, f = dataset("B", "LN")
    freq, z1, z2 = exact_impedance(mix)
    kernel = build_matrix("A4s", freq)
    b = add_noise(stacked_data(z1, z2), 1e-3, 3).b
    truth = f(kernel.sgrid.s_values)
    L = make_smoothing(1, 130)
    res = sweep(kernel.entries, [b], [0.05], truth, L=L, solver="nnls", error_weight=kernel.sgrid.delta_s,
                labels={"dataset": "B", "model": "LN"})
    direct = mean_error_at(kernel.entries, [b], 0.05, truth, L=L, solver="nnls", error_weight=kernel.sgrid.delta_s)
    assert res.error.shape == (1, 1)
    assert res.error[0, 0] == pytest.approx(direct, rel=1e-14)
    assert res.lam_opt[0] == 0.05 and res.lam_ncp[0] == 0.05
    res.write_csv(tmp_path / "cells.csv")
    lines = open(tmp_path / "cells.csv").read().splitlines()
    assert lines[0] == ",".join(SweepResult.CSV_COLUMNS) and len(lines) == 2
    res.write_json(tmp_path / "s.json")
    assert json.load(open(tmp_path / "s.json"))["markers"]["lambda_opt_min"] == 0.05


def test_sweep_lam_opt_attains_row_minimum():
    kernel, bs, truth = a4s_problem("A", "LN")
    res = sweep(kernel.entries, bs[:3], lambda_grid_default(10), truth, solver="lls", error_weight=kernel.sgrid.delta_s)
    for r in range(3):
        i = int(np.flatnonzero(res.lambdas == res.lam_opt[r])[0])
        assert res.error[r, i] == np.nanmin(res.error[r])


def test_sweep_parallel_matches_serial():
    kernel, bs, truth = a4s_problem("B", "RQ")
    args = (kernel.entries, bs[:2], lambda_grid_default(4), truth)
    a = sweep(*args, solver="lls", n_jobs=1)
    b = sweep(*args, solver="lls", n_jobs=2)
    assert np.array_equal(a.error, b.error) and np.array_equal(a.ks, b.ks)


def test_filter_monotonicity_check():
    res = SweepResult(np.array([1.0, 2.0]), [0], np.zeros((1, 2)), np.array([[2.0, 1.0]]),
                      np.array([[1.0, 0.5]]), np.zeros((1, 2)), np.zeros((1, 2), bool), None, 0.2)
    with pytest.raises(RuntimeError):
        check_filter_monotonicity(res)


@pytest.mark.slow
def test_ln_a_error_curve_u_shaped():
    res = full_sweep("A", "LN", "nnls")
    e = res.mean_error
    i = int(np.nanargmin(e))
    assert 0 < i < e.size - 1
    assert e[0] >= 1.5 * e[i] and e[-1] >= 1.5 * e[i]
    assert np.sum(e == e[i]) == 1
