import numpy as np
import pytest

from dglm import ar
from dglm.kalman import (
    KalmanError,
    aic_search,
    default_variance_grid,
    iwkf_smooth,
    simulate_state_space,
    state_space_form,
)
from dglm.model import GaussianObs

from helpers import dense_gaussian_posterior, fixed_block, toy_assembled


@pytest.mark.parametrize("make_spec", [
    lambda: ar.rw1_spec(0.5),
    lambda: ar.rw2_spec(0.3),
    lambda: ar.llt_spec(0.2, 0.1),
])
def test_companion_form_equals_direct_recursion(make_spec):
    spec = make_spec()
    n = 40
    asm = toy_assembled(np.zeros(n, dtype=int), spec)
    ssf = state_space_form(asm)
    path = ar.simulate_ar_path(spec, n, 11)
    innov = ar.innovations(spec, path)
    p, q = spec.p, spec.q
    init = np.concatenate([path[p - 1 - l] for l in range(p)])
    innov_full = np.zeros((n, ssf.dim))
    innov_full[:, :q] = innov
    states = simulate_state_space(ssf, n, innov_full, init)
    assert np.max(np.abs(states[1:, :q] - path[p:])) < 1e-12


def test_gaussian_smoother_matches_dense_posterior():
    rng = np.random.default_rng(3)
    n = 50
    spec = ar.rw1_spec(0.4, mu0=1.0, sigma0=2.0)
    X = rng.normal(size=(n, 2))
    fixed = fixed_block(X, prior_var=4.0)
    sig2 = 0.3
    truth = ar.simulate_ar_path(spec, n, 9)[1:, 0]
    y = truth + X @ np.array([0.5, -0.3]) + rng.normal(0, np.sqrt(sig2), n)
    asm = toy_assembled(np.zeros(n, dtype=int), spec, fixed=fixed)
    asm.y = y
    out = iwkf_smooth(asm, obs=GaussianObs(sig2))
    assert out.converged and out.iterations <= 2
    mean, cov = dense_gaussian_posterior(spec, n, np.ones((n, 1)), fixed, y, sig2)
    p, q = spec.p, spec.q
    dim = (n + p) * q
    beta_mean = mean[p:dim:q]
    beta_var = np.diag(cov)[p:dim:q]
    assert np.max(np.abs(out.beta_means[0][:, 0] - beta_mean)) < 1e-8
    assert np.max(np.abs(out.beta_vars[0][:, 0] - beta_var)) < 1e-8
    assert np.max(np.abs(out.alpha - mean[dim:])) < 1e-8
    # edf equals the trace of the hat matrix of the working regression
    rows = np.zeros((n, dim + 2))
    rows[:, dim:] = X
    for t in range(n):
        rows[t, (t + p) * q] = 1.0
    hat = rows @ cov @ rows.T / sig2
    assert abs(out.edf - np.trace(hat)) < 1e-8


def test_smoothed_variances_not_above_filtered():
    rng = np.random.default_rng(4)
    n = 60
    spec = ar.rw2_spec(0.1, sigma0=2.0)
    y = rng.poisson(np.exp(2.0 + 0.3 * np.sin(np.arange(n) / 7)))
    asm = toy_assembled(y, spec)
    out = iwkf_smooth(asm)
    assert np.all(out.state_vars <= out.filtered_vars + 1e-10)
    assert np.all(out.state_vars >= -1e-12)


def test_poisson_smoother_recovers_trend():
    spec_true = ar.rw1_spec(0.05, mu0=2.0, sigma0=0.0)
    trend = ar.simulate_ar_path(spec_true, 200, 21)[1:, 0]
    y = np.random.default_rng(4).poisson(np.exp(trend))
    asm = toy_assembled(y, ar.rw1_spec(0.05, mu0=2.0, sigma0=1.0))
    out = iwkf_smooth(asm)
    assert out.converged
    assert np.corrcoef(out.eta, trend)[0, 1] > 0.95


def test_tiny_variance_collapses_to_glm_intercept():
    rng = np.random.default_rng(5)
    y = rng.poisson(20.0, size=150)
    asm = toy_assembled(y, ar.rw1_spec(1e-12, mu0=3.0, sigma0=10.0))
    out = iwkf_smooth(asm)
    assert np.ptp(out.eta) < 1e-3
    assert abs(out.eta.mean() - np.log(y.mean())) < 0.01


def test_aic_single_grid_point():
    rng = np.random.default_rng(6)
    y = rng.poisson(10.0, size=80)
    asm = toy_assembled(y, ar.rw1_spec(0.1, mu0=2.0, sigma0=2.0))
    res = aic_search(asm, grids={("trend", 0): np.array([0.02])})
    assert res.best == {("trend", 0): 0.02}
    assert len(res.table) == 1
    assert not res.boundary_hit  # a single point has no meaningful boundary
    assert asm.dynamic[0].spec.sigma_beta[0, 0] == 0.1  # restored


def test_aic_table_deterministic():
    rng = np.random.default_rng(7)
    y = rng.poisson(12.0, size=60)
    grid = np.logspace(-6, -1, 6)
    res1 = aic_search(toy_assembled(y, ar.rw1_spec(0.1, sigma0=2.0, mu0=2.5)),
                      grids={("trend", 0): grid})
    res2 = aic_search(toy_assembled(y, ar.rw1_spec(0.1, sigma0=2.0, mu0=2.5)),
                      grids={("trend", 0): grid})
    assert res1.best == res2.best
    for r1, r2 in zip(res1.table, res2.table):
        assert r1 == r2


def test_default_grid_shape():
    g = default_variance_grid()
    assert g.size == 17
    assert np.isclose(g[0], 1e-8) and np.isclose(g[-1], 1.0)


def test_aic_boundary_flagging():
    # constant data prefers the smallest variance on the grid
    rng = np.random.default_rng(8)
    y = rng.poisson(15.0, size=100)
    asm = toy_assembled(y, ar.rw1_spec(0.1, mu0=2.7, sigma0=2.0))
    res = aic_search(asm, grids={("trend", 0): np.logspace(-8, -1, 8)})
    assert res.best[("trend", 0)] == pytest.approx(1e-8)
    assert res.boundary_hit


def test_no_dynamic_blocks_rejected():
    y = np.arange(5) + 1
    asm = toy_assembled(y, spec=None, fixed=fixed_block(np.ones((5, 1))))
    with pytest.raises(KalmanError):
        aic_search(asm)
