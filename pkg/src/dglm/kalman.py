"""Likelihood-based alternative: iteratively re-weighted Kalman filter and
Rauch-Tung-Striebel smoother for posterior-mode estimation of the dynamic
coefficients, plus an AIC grid search over the evolution variances."""

import itertools
from dataclasses import dataclass

import numpy as np

from .model import AssembledModel, PoissonObs, poisson_loglik


class KalmanError(RuntimeError):
    pass


@dataclass
class StateSpaceForm:
    """Companion-form embedding of all dynamic blocks plus constant
    (zero-innovation) states for the fixed effects."""
    transition: np.ndarray       # d x d
    innovation_cov: np.ndarray   # d x d
    obs_rows: np.ndarray         # n x d, eta_t = obs_rows[t] @ state_t
    init_mean: np.ndarray
    init_cov: np.ndarray
    block_slices: list           # per dynamic block: slice of the current beta_t
    alpha_slice: slice

    @property
    def dim(self):
        return self.transition.shape[0]


def state_space_form(assembled: AssembledModel) -> StateSpaceForm:
    """Build the stacked companion form.

    Each AR(p) block contributes a pq-dimensional companion state
    (beta_t, ..., beta_{t-p+1}); fixed effects become constant states with
    unit transition and zero innovation variance.
    """
    n = assembled.n
    dims = []
    for b in assembled.dynamic:
        dims.append(b.spec.p * b.spec.q)
    r = assembled.fixed.r
    d = sum(dims) + r
    T = np.zeros((d, d))
    Q = np.zeros((d, d))
    m0 = np.zeros(d)
    P0 = np.zeros((d, d))
    obs = np.zeros((n, d))
    slices = []
    off = 0
    for b, dim in zip(assembled.dynamic, dims):
        p, q = b.spec.p, b.spec.q
        comp = np.zeros((dim, dim))
        for l in range(p):
            comp[:q, l * q : (l + 1) * q] = b.spec.F[l]
        if p > 1:
            comp[q:, : (p - 1) * q] = np.eye((p - 1) * q)
        T[off : off + dim, off : off + dim] = comp
        Q[off : off + q, off : off + q] = b.spec.sigma_beta
        for l in range(p):
            sl = slice(off + l * q, off + (l + 1) * q)
            m0[sl] = b.spec.init_mean
            P0[sl, sl] = b.spec.init_cov
        obs[:, off : off + q] = b.design
        slices.append(slice(off, off + q))
        off += dim
    alpha_slice = slice(off, off + r)
    T[off : off + r, off : off + r] = np.eye(r)
    m0[alpha_slice] = assembled.fixed.prior_mean
    P0[off : off + r, off : off + r] = assembled.fixed.prior_cov
    obs[:, alpha_slice] = assembled.fixed.design
    return StateSpaceForm(
        transition=T, innovation_cov=Q, obs_rows=obs,
        init_mean=m0, init_cov=P0, block_slices=slices, alpha_slice=alpha_slice,
    )


def simulate_state_space(ssf: StateSpaceForm, n, innovations, init_state):
    """Deterministic forward run given explicit innovation draws; used to
    check the companion embedding against the direct AR recursion."""
    d = ssf.dim
    states = np.empty((n + 1, d))
    states[0] = init_state
    for t in range(1, n + 1):
        states[t] = ssf.transition @ states[t - 1] + innovations[t - 1]
    return states


def _filter_smooth(ssf: StateSpaceForm, z, obs_var):
    """Linear Kalman filter + RTS smoother with a scalar observation.

    Returns smoothed means/covariances per t = 1..n and the filtered
    covariances (for monotonicity checks)."""
    T, Q = ssf.transition, ssf.innovation_cov
    n = z.shape[0]
    d = ssf.dim
    m_pred = np.empty((n, d))
    P_pred = np.empty((n, d, d))
    m_filt = np.empty((n, d))
    P_filt = np.empty((n, d, d))
    m, P = ssf.init_mean, ssf.init_cov
    for t in range(n):
        mp = T @ m
        Pp = T @ P @ T.T + Q
        Pp = 0.5 * (Pp + Pp.T)
        a = ssf.obs_rows[t]
        Pa = Pp @ a
        S = float(a @ Pa) + obs_var[t]
        if S <= 0:
            raise KalmanError(f"non-positive innovation variance at t={t + 1}")
        gain = Pa / S
        m = mp + gain * (z[t] - float(a @ mp))
        P = Pp - np.outer(gain, Pa)
        P = 0.5 * (P + P.T)
        if np.any(np.diag(P) < -1e-8):
            raise KalmanError(f"filter covariance indefinite at t={t + 1}")
        np.fill_diagonal(P, np.maximum(np.diag(P), 0.0))
        m_pred[t], P_pred[t] = mp, Pp
        m_filt[t], P_filt[t] = m, P
    m_sm = np.empty((n, d))
    P_sm = np.empty((n, d, d))
    m_sm[-1], P_sm[-1] = m_filt[-1], P_filt[-1]
    for t in range(n - 2, -1, -1):
        Ppinv_next = np.linalg.pinv(P_pred[t + 1])
        J = P_filt[t] @ T.T @ Ppinv_next
        m_sm[t] = m_filt[t] + J @ (m_sm[t + 1] - m_pred[t + 1])
        Pt = P_filt[t] + J @ (P_sm[t + 1] - P_pred[t + 1]) @ J.T
        P_sm[t] = 0.5 * (Pt + Pt.T)
    return m_sm, P_sm, P_filt


@dataclass
class SmootherOutput:
    state_means: np.ndarray      # n x d smoothed state means
    state_vars: np.ndarray       # n x d smoothed state variances (diagonal)
    eta: np.ndarray              # fitted linear predictor
    eta_var: np.ndarray          # smoothed variance of eta_t
    alpha: np.ndarray            # smoothed fixed effects (from t = n)
    beta_means: list             # per dynamic block: n x q smoothed means
    beta_vars: list              # per dynamic block: n x q smoothed variances
    loglik: float                # observation log-likelihood at the fit
    edf: float                   # effective degrees of freedom (hat-trace)
    converged: bool
    iterations: int
    filtered_vars: np.ndarray    # n x d filtered state variances


def iwkf_smooth(assembled: AssembledModel, obs=None, tol=1e-8,
                max_iter=50) -> SmootherOutput:
    """Iteratively re-weighted Kalman filter/smoother.

    Linearises the observation model at the current fit into working
    observations and variances, smooths the working Gaussian model, and
    repeats to convergence of the fitted linear predictor.
    """
    if obs is None:
        obs = PoissonObs()
    ssf = state_space_form(assembled)
    n = assembled.n
    y = assembled.y.astype(float)
    if isinstance(obs, PoissonObs):
        eta = np.log(y + 0.5)
    else:
        eta = y.copy()
    converged = False
    result = None
    for it in range(1, max_iter + 1):
        z, obs_var = obs.working(y, eta)
        obs_var = np.broadcast_to(obs_var, (n,))
        m_sm, P_sm, P_filt = _filter_smooth(ssf, z, obs_var)
        eta_new = np.einsum("td,td->t", ssf.obs_rows, m_sm)
        delta = float(np.max(np.abs(eta_new - eta)))
        eta = eta_new
        result = (m_sm, P_sm, P_filt, z, obs_var)
        if delta < tol:
            converged = True
            break
    m_sm, P_sm, P_filt, z, obs_var = result
    eta_var = np.einsum("td,tde,te->t", ssf.obs_rows, P_sm, ssf.obs_rows)
    edf = float(np.sum(eta_var / obs_var))
    if isinstance(obs, PoissonObs):
        ll = poisson_loglik(assembled.y, np.exp(eta))
    else:
        ll = float(np.sum(obs.loglik_terms(y, eta)))
    beta_means, beta_vars = [], []
    for sl in ssf.block_slices:
        beta_means.append(m_sm[:, sl])
        beta_vars.append(np.einsum("tqq->tq", P_sm[:, sl, sl]))
    return SmootherOutput(
        state_means=m_sm,
        state_vars=np.einsum("tdd->td", P_sm),
        eta=eta,
        eta_var=eta_var,
        alpha=m_sm[-1, ssf.alpha_slice].copy(),
        beta_means=beta_means,
        beta_vars=beta_vars,
        loglik=ll,
        edf=edf,
        converged=converged,
        iterations=it,
        filtered_vars=np.einsum("tdd->td", P_filt),
    )


def default_variance_grid(lo=1e-8, hi=1.0, points=17):
    return np.logspace(np.log10(lo), np.log10(hi), points)


@dataclass
class AicResult:
    best: dict                  # (block name, component) -> variance
    best_aic: float
    table: list                 # rows: (variances dict, aic, loglik, edf, converged)
    boundary_hit: bool


def aic_search(assembled: AssembledModel, grids=None, obs=None) -> AicResult:
    """Grid search over the dynamic evolution variances, scored by
    AIC = -2 loglik + 2 edf at the smoothed fit."""
    if grids is None:
        grids = {}
    axes = []
    keys = []
    for b in assembled.dynamic:
        for j in range(b.spec.q):
            key = (b.name, j)
            keys.append(key)
            axes.append(np.asarray(grids.get(key, default_variance_grid()), dtype=float))
    if not keys:
        raise KalmanError("no dynamic variance components to search over")
    table = []
    best_aic = np.inf
    best = None
    saved = [b.spec.sigma_beta.copy() for b in assembled.dynamic]
    try:
        for combo in itertools.product(*axes):
            point = dict(zip(keys, combo))
            for b in assembled.dynamic:
                for j in range(b.spec.q):
                    b.spec.sigma_beta[j, j] = point[(b.name, j)]
            try:
                out = iwkf_smooth(assembled, obs=obs)
            except KalmanError:
                table.append((point, np.nan, np.nan, np.nan, False))
                continue
            aic = -2.0 * out.loglik + 2.0 * out.edf
            table.append((point, aic, out.loglik, out.edf, out.converged))
            if aic < best_aic:
                best_aic = aic
                best = point
    finally:
        for b, sb in zip(assembled.dynamic, saved):
            b.spec.sigma_beta[:] = sb
    if best is None:
        raise KalmanError("no grid point converged")
    boundary = any(
        best[k] in (ax[0], ax[-1]) for k, ax in zip(keys, axes) if ax.size > 1
    )
    return AicResult(best=best, best_aic=best_aic, table=table, boundary_hit=boundary)
