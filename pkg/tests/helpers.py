"""Shared construction and oracle utilities for the test suite."""

import numpy as np

from dglm.ar import ArProcessSpec, build_precision
from dglm.model import (
    AssembledModel,
    DynamicEffectBlock,
    FixedEffectBlock,
    ModelConfig,
)


def fixed_block(design, prior_var=10.0, prior_mean=None, names=None):
    design = np.asarray(design, dtype=float)
    r = design.shape[1]
    if prior_mean is None:
        prior_mean = np.zeros(r)
    if names is None:
        names = [f"c{i}" for i in range(r)]
    return FixedEffectBlock(
        design=design, prior_mean=np.asarray(prior_mean, dtype=float),
        prior_cov=np.eye(r) * prior_var, names=list(names),
        col_means=np.zeros(r), col_sds=np.ones(r),
    )


def empty_fixed(n):
    return FixedEffectBlock(
        design=np.zeros((n, 0)), prior_mean=np.zeros(0),
        prior_cov=np.zeros((0, 0)), names=[], col_means=np.zeros(0),
        col_sds=np.ones(0),
    )


def toy_assembled(y, spec=None, design=None, fixed=None, name="trend",
                  model_id=3):
    """Hand-built model: one optional dynamic block plus a fixed block."""
    y = np.asarray(y)
    n = y.size
    if fixed is None:
        fixed = empty_fixed(n)
    dynamic = []
    if spec is not None:
        if design is None:
            design = np.tile(np.eye(spec.q)[0], (n, 1))
        dynamic.append(DynamicEffectBlock(name=name, design=np.asarray(design, dtype=float),
                                          spec=spec, scale=1.0))
    cfg = ModelConfig.from_model_id(model_id)
    return AssembledModel(y=y, fixed=fixed, dynamic=dynamic, config=cfg,
                          lag_offset=0, pollutant_sd=1.0, dataset=None)


def random_spec(rng, p=None, q=None, stationary=False):
    """Random AR process spec for oracle comparisons."""
    p = int(rng.integers(1, 3)) if p is None else p
    q = int(rng.integers(1, 3)) if q is None else q
    F = [rng.normal(0, 0.6 if stationary else 1.0, size=(q, q))
         for _ in range(p)]
    A = rng.normal(size=(q, q))
    sigma = A @ A.T + np.eye(q) * 0.5
    return ArProcessSpec(
        p=p, F=F, sigma_beta=sigma, init_mean=rng.normal(size=q),
        init_cov=np.eye(q) * float(rng.uniform(0.5, 2.0)),
    )


def dense_gaussian_posterior(spec, n, X_dyn, fixed, y, obs_var):
    """Exact joint Gaussian posterior over (stacked beta, alpha) for
    Gaussian observations y_t = x_t' beta_t + z_t' alpha + e_t.

    Returns (mean, cov) with beta entries first (row-major over time then
    component), initializer prior included."""
    K = build_precision(spec, n).to_dense()
    p, q = spec.p, spec.q
    dim = (n + p) * q
    r = fixed.r
    P = np.zeros((dim + r, dim + r))
    P[:dim, :dim] = K
    lin = np.zeros(dim + r)
    P0inv = np.linalg.inv(spec.init_cov)
    for l in range(p):
        sl = slice(l * q, (l + 1) * q)
        P[sl, sl] += P0inv
        lin[sl] += P0inv @ spec.init_mean
    if r:
        P[dim:, dim:] += np.linalg.inv(fixed.prior_cov)
        lin[dim:] += np.linalg.solve(fixed.prior_cov, fixed.prior_mean)
    for t in range(n):
        row = np.zeros(dim + r)
        row[(t + p) * q : (t + p + 1) * q] = X_dyn[t]
        if r:
            row[dim:] = fixed.design[t]
        P += np.outer(row, row) / obs_var
        lin += row * (y[t] / obs_var)
    cov = np.linalg.inv(P)
    return cov @ lin, cov


def poisson_glm_fit(y, X, max_iter=100, tol=1e-10):
    """Maximum-likelihood Poisson regression by Newton iteration."""
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ beta
        mu = np.exp(eta)
        grad = X.T @ (y - mu)
        hess = X.T @ (X * mu[:, None])
        step = np.linalg.solve(hess, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


def batch_means_se(x, n_batches=25):
    """Autocorrelation-aware MC standard error via long-batch means."""
    x = np.asarray(x, dtype=float)
    m = (x.size // n_batches) * n_batches
    batches = x[:m].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))
