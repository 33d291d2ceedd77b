import numpy as np
import pytest

from dglm.ar import rw1_spec
from dglm.diagnostics import (
    DiagnosticsError,
    acf,
    batch_means_se,
    dic,
    gamma_draws_per_unit,
    quantiles,
    realized_residuals,
    relative_risk,
    rhat,
    summarize_fit,
)
from dglm.model import GroundTruth, ModelConfig, assemble_model, poisson_loglik, simulate_dataset
from dglm.sampler import PosteriorSamples, SamplerSettings, run_chain

from helpers import fixed_block, toy_assembled


def fake_samples(asm, alpha_draws, beta_draws=None, loglik=None):
    """Minimal PosteriorSamples wrapper around explicit draws (one chain)."""
    draws = {"alpha": np.asarray(alpha_draws)[None, :, :]}
    if beta_draws is not None:
        draws["beta:trend"] = np.asarray(beta_draws)[None, :, :]
    if loglik is not None:
        draws["loglik"] = np.asarray(loglik)[None, :]
    eta = np.zeros(asm.n)
    settings = SamplerSettings(n_burnin=0, n_iterations=len(alpha_draws), thin=1,
                               n_chains=1)
    return PosteriorSamples(
        draws=draws, acceptance={}, divergences=0, settings=settings, seed=0,
        model_id=asm.config.model_id, alpha_names=list(asm.fixed.names),
        block_info=[(b.name, b.spec.p, b.spec.q) for b in asm.dynamic],
        n=asm.n, eta_mean=eta)


# ---------------------------------------------------------------------------
# realized residuals

def test_residual_zero_when_y_equals_mu():
    n = 4
    y = np.array([1, 1, 1, 1])
    asm = toy_assembled(y, spec=None, fixed=fixed_block(np.ones((n, 1))),
                        model_id=1)
    samples = fake_samples(asm, np.zeros((10, 1)))  # mu = exp(0) = 1
    draws, plug_in = realized_residuals(samples, asm)
    assert np.allclose(draws, 0.0)
    assert np.allclose(plug_in, 0.0)


def test_residual_formula():
    # y = 4 against mu = 1 gives (4 - 1)/sqrt(1) = 3
    asm = toy_assembled(np.array([4]), spec=None,
                        fixed=fixed_block(np.ones((1, 1))), model_id=1)
    samples = fake_samples(asm, np.zeros((5, 1)))
    draws, plug_in = realized_residuals(samples, asm)
    assert np.allclose(draws, 3.0)
    assert np.allclose(plug_in, 3.0)


def test_residual_calibration_on_well_specified_fit():
    rng = np.random.default_rng(0)
    n = 300
    y = rng.poisson(np.exp(2.0), n)
    asm = toy_assembled(y, rw1_spec(1e-4, mu0=2.0, sigma0=1.0))
    settings = SamplerSettings(n_burnin=500, n_iterations=2000, thin=2,
                               n_chains=1, seed=1)
    samples = run_chain(asm, settings)
    draws, _ = realized_residuals(samples, asm, thin=10)
    bound = 3.0 / np.sqrt(draws.size)
    assert abs(draws.mean()) < max(bound, 0.05)


# ---------------------------------------------------------------------------
# acf

def test_acf_lag0_is_one():
    vals, band = acf(np.random.default_rng(1).normal(size=100), max_lag=5)
    assert vals[0] == 1.0
    assert band == pytest.approx(1.96 / 10.0)


def test_acf_alternating_series():
    x = np.resize([1.0, -1.0], 200)
    vals, _ = acf(x, max_lag=2)
    assert abs(vals[1] + 1.0) < 0.02
    assert abs(vals[2] - 1.0) < 0.02


def test_acf_white_noise_band():
    x = np.random.default_rng(12).normal(size=10000)
    vals, _ = acf(x, max_lag=20)
    assert np.all(np.abs(vals[1:]) < 0.03)


def test_acf_zero_variance_rejected():
    with pytest.raises(DiagnosticsError):
        acf(np.ones(50), max_lag=5)


def test_acf_short_series_rejected():
    with pytest.raises(DiagnosticsError):
        acf(np.arange(5.0), max_lag=10)


# ---------------------------------------------------------------------------
# DIC

def test_dic_degenerate_chain():
    n = 6
    y = np.array([2, 3, 1, 4, 2, 3])
    asm = toy_assembled(y, spec=None, fixed=fixed_block(np.ones((n, 1))),
                        model_id=1)
    alpha = np.full((20, 1), 0.7)
    ll = np.full(20, poisson_loglik(y, np.exp(np.full(n, 0.7))))
    samples = fake_samples(asm, alpha, loglik=ll)
    samples.eta_mean = np.full(n, 0.7)
    d, pd, dbar = dic(samples, asm)
    assert abs(pd) < 1e-10
    assert abs(d - dbar) < 1e-10


def test_dic_replication_across_seeds():
    rng = np.random.default_rng(3)
    n = 120
    y = rng.poisson(8.0, n)
    vals = []
    for seed in (10, 20):
        asm = toy_assembled(y, rw1_spec(1e-4, mu0=2.0, sigma0=1.0))
        settings = SamplerSettings(n_burnin=1500, n_iterations=8000, thin=2,
                                   n_chains=2, seed=seed)
        samples = run_chain(asm, settings)
        vals.append(dic(samples, asm)[0])
    assert abs(vals[0] - vals[1]) < 2.0


def test_dic_requires_loglik():
    asm = toy_assembled(np.array([1, 2]), spec=None,
                        fixed=fixed_block(np.ones((2, 1))), model_id=1)
    samples = fake_samples(asm, np.zeros((5, 1)))
    with pytest.raises(DiagnosticsError):
        dic(samples, asm)


# ---------------------------------------------------------------------------
# R-hat

def test_rhat_identical_chains():
    # split halves of one chain differ slightly, so the statistic sits just
    # under 1 at finite length; it converges to 1 as the chain grows
    x = np.random.default_rng(4).normal(size=1000)
    assert rhat(np.vstack([x, x])) == pytest.approx(1.0, abs=2e-3)


def test_rhat_stationary_chains_near_one():
    rng = np.random.default_rng(5)
    assert rhat(rng.normal(size=(2, 10000))) < 1.01


def test_rhat_separated_chains_large():
    rng = np.random.default_rng(6)
    chains = np.vstack([rng.normal(0, 1, 2000), rng.normal(10, 1, 2000)])
    assert rhat(chains) > 1.1


def test_rhat_single_chain_unavailable():
    assert np.isnan(rhat(np.zeros((1, 100))))


# ---------------------------------------------------------------------------
# relative risk and quantiles

def test_relative_risk_zero_gamma():
    assert relative_risk(np.zeros(5)).tolist() == [1.0] * 5


def test_relative_risk_table_value():
    gamma = np.log(1.007) / 10.0
    assert relative_risk(np.array([gamma]))[0] == pytest.approx(1.007)


def test_relative_risk_quantile_commutation():
    # 4001 draws: (N - 1) p is an integer at p in {0.025, 0.5, 0.975},
    # so the empirical quantiles are exact order statistics
    draws = np.random.default_rng(7).normal(7e-4, 3e-4, size=4001)
    q_gamma = quantiles(draws)
    q_rr = quantiles(relative_risk(draws))
    assert np.max(np.abs(np.exp(10 * q_gamma) - q_rr)) < 1e-12


def test_relative_risk_order_preserving():
    draws = np.random.default_rng(8).normal(size=100)
    assert np.array_equal(np.argsort(draws), np.argsort(relative_risk(draws)))


def test_quantiles_ordered():
    x = np.random.default_rng(9).normal(size=(500, 3))
    q = quantiles(x, axis=0)
    assert np.all(q[0] <= q[1]) and np.all(q[1] <= q[2])


# ---------------------------------------------------------------------------
# summary assembly

def test_summarize_fit_structure():
    cfg = ModelConfig.from_model_id(4)
    ds, _ = simulate_dataset(cfg, GroundTruth(trend_tau2=1e-6, gamma=5e-4), 90, 2)
    asm = assemble_model(ds, cfg)
    settings = SamplerSettings(n_burnin=400, n_iterations=1200, thin=3,
                               n_chains=2, seed=3)
    samples = run_chain(asm, settings)
    summary = summarize_fit(samples, asm)
    for q in summary.parameter_quantiles.values():
        if isinstance(q, np.ndarray) and q.size == 3:
            assert q[0] <= q[1] <= q[2]
    assert summary.trend_quantiles.shape == (asm.n, 3)
    assert np.all(summary.trend_quantiles > 0)          # count scale
    assert summary.effect_time_varying
    assert np.all(summary.effect_rr_quantiles > 0)
    assert summary.pd > 0
    # gamma draws back-transform: per-unit = standardized / sd(pm10)
    g = gamma_draws_per_unit(samples, asm)
    assert g.shape == (samples.n_retained * 2, asm.n)


def test_batch_means_se_iid():
    x = np.random.default_rng(10).normal(size=20000)
    se = batch_means_se(x, n_batches=40)
    assert se == pytest.approx(1.0 / np.sqrt(20000), rel=0.35)
