"""Posterior summarisation and model criticism: realized residuals, ACF,
DIC, potential scale reduction, relative risks and fit summaries."""

from dataclasses import dataclass

import numpy as np

from .model import AssembledModel, poisson_loglik
from .sampler import PosteriorSamples


class DiagnosticsError(ValueError):
    pass


def quantiles(draws, probs=(0.025, 0.5, 0.975), axis=0):
    """Shared empirical-quantile routine (type-7 interpolation)."""
    return np.quantile(np.asarray(draws, dtype=float), probs, axis=axis,
                       method="linear")


def eta_draws(samples: PosteriorSamples, assembled: AssembledModel, thin=1):
    """Linear predictor per retained draw, recomputed from the stored
    parameter draws; shape (draws, n)."""
    alpha = samples.flat("alpha")[::thin]
    eta = alpha @ assembled.fixed.design.T
    for b in assembled.dynamic:
        p, q = b.spec.p, b.spec.q
        bd = samples.flat(f"beta:{b.name}")[::thin]
        path = bd.reshape(bd.shape[0], -1, q)[:, p : p + assembled.n, :]
        eta = eta + np.einsum("jtq,tq->jt", path, b.design)
    return eta


def realized_residuals(samples: PosteriorSamples, assembled: AssembledModel, thin=1):
    """Pearson-type residual distribution r_t^(j) = (y_t - mu_t^(j)) / sqrt(mu_t^(j)).

    Returns (residual draws, median plug-in residuals); the plug-in version
    uses the posterior median linear predictor per t."""
    eta = eta_draws(samples, assembled, thin=thin)
    mu = np.exp(eta)
    y = assembled.y.astype(float)
    draws = (y[None, :] - mu) / np.sqrt(mu)
    eta_med = np.median(eta, axis=0)
    mu_med = np.exp(eta_med)
    plug_in = (y - mu_med) / np.sqrt(mu_med)
    return draws, plug_in


def acf(series, max_lag=30):
    """Sample autocorrelation normalised by the lag-0 autocovariance.

    Returns (acf values for lags 0..max_lag, significance band half-width
    1.96/sqrt(n))."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= max_lag:
        raise DiagnosticsError("series shorter than max_lag")
    x = x - x.mean()
    c0 = float(x @ x)
    if c0 == 0.0:
        raise DiagnosticsError("zero-variance series")
    vals = np.empty(max_lag + 1)
    vals[0] = 1.0
    for k in range(1, max_lag + 1):
        vals[k] = float(x[:-k] @ x[k:]) / c0
    return vals, 1.96 / np.sqrt(n)


def dic(samples: PosteriorSamples, assembled: AssembledModel):
    """(DIC, pD, mean deviance) with the plug-in at the posterior mean of
    the linear predictor."""
    if "loglik" not in samples.draws:
        raise DiagnosticsError("samples carry no log-likelihood draws")
    dbar = float(np.mean(-2.0 * samples.flat("loglik")))
    d_at_mean = -2.0 * poisson_loglik(assembled.y, np.exp(samples.eta_mean))
    pd = dbar - d_at_mean
    return dbar + pd, pd, dbar


def rhat(chain_draws):
    """Split-chain potential scale reduction factor.

    ``chain_draws`` has shape (n_chains, n_draws); returns NaN when fewer
    than two split halves are available."""
    x = np.asarray(chain_draws, dtype=float)
    if x.ndim != 2:
        raise DiagnosticsError("expected (n_chains, n_draws)")
    nc, nd = x.shape
    if nc < 2:
        return float("nan")
    half = nd // 2
    if half < 2:
        return float("nan")
    splits = np.vstack([x[:, :half], x[:, half : 2 * half]])
    m, n = splits.shape
    means = splits.mean(axis=1)
    w = float(np.mean(splits.var(axis=1, ddof=1)))
    b = n * float(means.var(ddof=1))
    if w == 0.0:
        return 1.0 if b == 0.0 else float("inf")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def relative_risk(gamma_draws, delta=10.0):
    """RR = exp(delta * gamma) per draw, for gamma on the per-unit scale."""
    return np.exp(delta * np.asarray(gamma_draws, dtype=float))


def gamma_draws_per_unit(samples: PosteriorSamples, assembled: AssembledModel):
    """Pollutant-effect draws back-transformed to the raw covariate scale.

    Constant effect: (draws,); time-varying: (draws, n)."""
    sd = assembled.pollutant_sd
    if assembled.config.pollution_effect == "constant":
        j = assembled.fixed.names.index("pm10")
        return samples.flat("alpha")[:, j] / sd
    for b in assembled.dynamic:
        if b.name == "pollution":
            bd = samples.flat("beta:pollution")
            p = b.spec.p
            return bd[:, p : p + assembled.n] / sd
    raise DiagnosticsError("no pollution effect in model")


def trend_draws_log_scale(samples: PosteriorSamples, assembled: AssembledModel):
    """Trend-component draws on the log (linear predictor) scale, (draws, n)."""
    for b in assembled.dynamic:
        if b.name == "trend":
            bd = samples.flat("beta:trend")
            q, p = b.spec.q, b.spec.p
            path = bd.reshape(bd.shape[0], -1, q)[:, p : p + assembled.n, 0]
            return path
    # spline trend: intercept plus calendar-spline columns
    names = assembled.fixed.names
    cols = [i for i, nm in enumerate(names)
            if nm == "intercept" or nm.startswith("calendar_s")]
    alpha = samples.flat("alpha")[:, cols]
    return alpha @ assembled.fixed.design[:, cols].T


@dataclass
class FitSummary:
    parameter_quantiles: dict    # name -> (2.5%, 50%, 97.5%)
    trend_quantiles: np.ndarray  # n x 3, count scale
    effect_rr_quantiles: np.ndarray | None  # n x 3 or 1 x 3, RR per increment
    effect_time_varying: bool
    dic: float
    pd: float
    mean_deviance: float
    acceptance: dict
    rhat: dict
    residual_acf: np.ndarray
    acf_band: float
    rr_increment: float
    divergences: int


def summarize_fit(samples: PosteriorSamples, assembled: AssembledModel,
                  rr_increment=10.0, max_lag=30, residual_thin=10) -> FitSummary:
    """Build the posterior summary: scalar-parameter quantiles, trend path
    on the count scale, relative-risk paths, DIC, R-hat, residual ACF."""
    pq = {}
    rh = {}
    for i, name in enumerate(samples.alpha_names):
        d = samples.draws["alpha"][:, :, i]
        pq[f"alpha:{name}"] = quantiles(d.reshape(-1))
        rh[f"alpha:{name}"] = rhat(d)
    for key in samples.draws:
        if key.startswith("var:") or key.startswith("F:"):
            d = samples.draws[key]
            if d.ndim == 2:
                pq[key] = quantiles(d.reshape(-1))
                rh[key] = rhat(d)
            else:
                for j in range(d.shape[2]):
                    pq[f"{key}:{j}"] = quantiles(d[:, :, j].reshape(-1))
                    rh[f"{key}:{j}"] = rhat(d[:, :, j])

    trend = trend_draws_log_scale(samples, assembled)
    trend_q = np.exp(quantiles(trend, axis=0)).T  # n x 3, count scale

    gamma = gamma_draws_per_unit(samples, assembled)
    rr = relative_risk(gamma, delta=rr_increment)
    time_varying = rr.ndim == 2
    if time_varying:
        rr_q = quantiles(rr, axis=0).T
    else:
        rr_q = quantiles(rr).reshape(1, 3)
        pq["relative_risk"] = rr_q[0]

    dic_val, pd_val, dbar = dic(samples, assembled)
    _, plug_in = realized_residuals(samples, assembled, thin=residual_thin)
    acf_vals, band = acf(plug_in, max_lag=min(max_lag, assembled.n - 1))

    return FitSummary(
        parameter_quantiles=pq,
        trend_quantiles=trend_q,
        effect_rr_quantiles=rr_q,
        effect_time_varying=time_varying,
        dic=dic_val,
        pd=pd_val,
        mean_deviance=dbar,
        acceptance=samples.acceptance,
        rhat=rh,
        residual_acf=acf_vals,
        acf_band=band,
        rr_increment=rr_increment,
        divergences=samples.divergences,
    )


def batch_means_se(x, n_batches=30):
    """Monte-Carlo standard error of the mean via batch means."""
    x = np.asarray(x, dtype=float)
    m = (x.size // n_batches) * n_batches
    if m < n_batches:
        raise DiagnosticsError("too few draws for batch means")
    batches = x[:m].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))
