"""Block Metropolis-Hastings sampler: conditional-prior proposals for the
dynamic coefficients, random-walk updates for the fixed effects and
truncated-Gaussian variances, and exact Gibbs draws for conjugate
variances, initialisers and free AR coefficients."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

from . import ar
from .ar import InverseGamma, TruncatedGaussian
from .model import MAX_ETA, AssembledModel, PoissonObs


class SamplerError(RuntimeError):
    pass


class NullObs:
    """Disabled likelihood; every kernel then targets its prior."""

    name = "none"

    def loglik_terms(self, y, eta):
        return np.zeros(np.shape(eta))


@dataclass
class SamplerSettings:
    n_burnin: int = 40000
    n_iterations: int = 100000
    thin: int = 5
    beta_block_size: int = 20      # block length g, in time points
    alpha_block_size: int = 4
    alpha_scale: float = 0.1
    variance_scale: float | None = None  # default: prior scale per component
    n_chains: int = 2
    seed: int = 0
    target_accept: float = 0.4
    adapt_window: int = 50
    randomize_sweep: bool = False
    max_init_attempts: int = 100

    def __post_init__(self):
        if self.n_burnin < 0 or self.thin < 1 or self.beta_block_size < 1:
            raise SamplerError("invalid sampler settings")

    @property
    def n_retained(self):
        return self.n_iterations // self.thin


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws, stacked per chain."""
    draws: dict                 # name -> (n_chains, n_retained, ...) array
    acceptance: dict            # kernel name -> post-burn-in acceptance rate
    divergences: int
    settings: SamplerSettings
    seed: int
    model_id: int
    alpha_names: list
    block_info: list            # (name, p, q) per dynamic block
    n: int
    eta_mean: np.ndarray        # posterior mean linear predictor per t

    @property
    def n_chains(self):
        return next(iter(self.draws.values())).shape[0]

    @property
    def n_retained(self):
        return next(iter(self.draws.values())).shape[1]

    def flat(self, name):
        """Draws for one parameter group with chains concatenated."""
        d = self.draws[name]
        return d.reshape(d.shape[0] * d.shape[1], *d.shape[2:])


def variance_gibbs_draw(prior: InverseGamma, ss, n, rng):
    """Conjugate inverse-gamma draw given the innovation sum of squares."""
    shape = prior.shape + 0.5 * n
    scale = prior.scale + 0.5 * ss
    return scale / rng.gamma(shape)


def variance_mh_logpost(sigma2, g, ss, n):
    if sigma2 <= 0:
        return -np.inf
    return -(sigma2**2) / (2.0 * g) - 0.5 * n * np.log(sigma2) - ss / (2.0 * sigma2)


def variance_mh_step(prior: TruncatedGaussian, sigma2, ss, n, scale, rng):
    """Random-walk move for sigma^2 under the positive-truncated Gaussian
    prior; proposals outside (0, inf) are rejected."""
    prop = sigma2 + scale * rng.standard_normal()
    if prop <= 0:
        return sigma2, False
    logr = variance_mh_logpost(prop, prior.g, ss, n) - variance_mh_logpost(
        sigma2, prior.g, ss, n
    )
    if np.log(rng.random()) < logr:
        return prop, True
    return sigma2, False


def f1_full_conditional(path, sigma2):
    """Moments of the flat-prior AR(1) coefficient given the scalar path
    (stacked, p = 1): mean sum(b_t b_{t-1}) / sum(b_{t-1}^2)."""
    prev = path[:-1]
    cur = path[1:]
    denom = float(prev @ prev)
    if denom == 0.0:
        raise SamplerError("degenerate path: sum of squared lags is zero")
    return float(prev @ cur) / denom, sigma2 / denom


def f2_full_conditional(path, sigma2):
    """Joint Gaussian full conditional of (F1, F2) for a scalar AR(2)
    process under a flat prior."""
    y = path[2:]
    X = np.column_stack([path[1:-1], path[:-2]])
    XtX = X.T @ X
    try:
        cov = sigma2 * np.linalg.inv(XtX)
    except np.linalg.LinAlgError as exc:
        raise SamplerError("degenerate path: singular lag Gram matrix") from exc
    mean = np.linalg.solve(XtX, X.T @ y)
    return mean, cov


def _sub_from_ab(ab, i0, i1):
    bw = ab.shape[0] - 1
    sub = ab[:, i0:i1].copy()
    for jj in range(min(bw, i1 - i0)):
        sub[: bw - jj, jj] = 0.0
    return sub


class _BlockState:
    """Mutable per-dynamic-block sampler state incl. precision caches."""

    def __init__(self, block, n, rng, settings):
        self.block = block
        self.spec = block.spec
        self.n = n
        self.q = block.spec.q
        self.p = block.spec.p
        self.comp_abs = ar.component_precisions(self.spec, n)
        self.variances = np.array(
            [self.spec.sigma_beta[j, j] for j in range(self.q)], dtype=float
        )
        self.F1 = None  # current free AR coefficients (q = 1 only)
        if self.spec.free_F:
            self.F1 = np.array([float(f[0, 0]) for f in self.spec.F])
        self.beta = np.zeros((n + self.p) * self.q)
        self.K = ar.ArPrecision(
            ab=np.zeros_like(self.comp_abs[0]), n=n, p=self.p, q=self.q
        )
        self._chol_cache = {}
        self.var_scales = np.empty(self.q)
        for j in range(self.q):
            if settings.variance_scale is not None:
                self.var_scales[j] = settings.variance_scale
            else:
                prior = self._prior(j)
                if isinstance(prior, TruncatedGaussian):
                    self.var_scales[j] = np.sqrt(prior.g)
                else:
                    self.var_scales[j] = max(self.variances[j], 1e-12)
        self.refresh_precision()

    def _prior(self, j):
        priors = self.spec.variance_priors
        return priors[j] if j < len(priors) else None

    def refresh_precision(self):
        ab = self.comp_abs[0] / self.variances[0]
        for j in range(1, self.q):
            ab = ab + self.comp_abs[j] / self.variances[j]
        self.K.ab = ab
        if self.q > 1:
            self._chol_cache.clear()

    def rebuild_structure(self):
        """After a free-F update the precision pattern itself changes."""
        self.comp_abs = ar.component_precisions(self.spec, self.n)
        self._chol_cache.clear()
        self.refresh_precision()

    def unit_chol(self, r, s):
        """Cholesky of the unit-variance conditional precision (q = 1).

        K-tilde values depend on (r, s) only through the block length and
        the distance to the right data edge, so factors are cached."""
        key = (s - r + 1, min(self.n - s, self.p))
        fac = self._chol_cache.get(key)
        if fac is None:
            i0 = self.K.index(r)
            i1 = self.K.index(s) + 1
            sub = _sub_from_ab(self.comp_abs[0], i0, i1)
            fac = cholesky_banded(sub, lower=False)
            self._chol_cache[key] = fac
        return fac

    def path(self):
        return self.beta.reshape(-1, self.q)

    def innovation_ss(self):
        nu = ar.innovations(self.spec, self.path())
        return (nu**2).sum(axis=0)


class _ChainRunner:
    def __init__(self, assembled: AssembledModel, settings, obs, rng):
        self.a = assembled
        self.s = settings
        self.obs = obs
        self.rng = rng
        self.y = assembled.y
        self.n = assembled.n
        self.blocks = [
            _BlockState(b, self.n, rng, settings) for b in assembled.dynamic
        ]
        self.alpha = assembled.fixed.prior_mean.copy()
        r = assembled.fixed.r
        abs_ = settings.alpha_block_size
        self.alpha_blocks = [
            np.arange(i, min(i + abs_, r)) for i in range(0, r, abs_)
        ]
        self.alpha_scales = np.full(len(self.alpha_blocks), settings.alpha_scale)
        self.alpha_prior_var = np.diag(assembled.fixed.prior_cov).copy()
        self.eta = None
        self.divergences = 0
        self.accept = {}
        self._window = {}

    # -- bookkeeping ----------------------------------------------------

    def _count(self, key, accepted, weight=1):
        acc = self.accept.setdefault(key, [0, 0])
        acc[0] += int(accepted) * weight
        acc[1] += weight
        win = self._window.setdefault(key, [0, 0])
        win[0] += int(accepted) * weight
        win[1] += weight

    def _adapt(self):
        for i in range(len(self.alpha_blocks)):
            key = f"alpha:{i}"
            win = self._window.get(key)
            if win and win[1] > 0:
                rate = win[0] / win[1]
                self.alpha_scales[i] *= np.exp(rate - self.s.target_accept)
                self._window[key] = [0, 0]
        for b in self.blocks:
            for j in range(b.q):
                key = f"var:{b.block.name}:{j}"
                win = self._window.get(key)
                if win and win[1] > 0:
                    rate = win[0] / win[1]
                    b.var_scales[j] *= np.exp(rate - self.s.target_accept)
                    self._window[key] = [0, 0]

    # -- initialisation --------------------------------------------------

    def _student_t4(self, size=None):
        return self.rng.standard_t(4, size=size)

    def initialize(self):
        fixed = self.a.fixed
        for attempt in range(self.s.max_init_attempts):
            sd = np.minimum(np.sqrt(self.alpha_prior_var), 1.0)
            self.alpha = fixed.prior_mean + sd * self._student_t4(fixed.r)
            for b in self.blocks:
                for j in range(b.q):
                    prior = b._prior(j)
                    if isinstance(prior, TruncatedGaussian):
                        b.variances[j] = abs(self._student_t4()) * np.sqrt(prior.g)
                        b.variances[j] = max(b.variances[j], prior.g**0.5 * 1e-3)
                    elif isinstance(prior, InverseGamma):
                        b.variances[j] = prior.scale / self.rng.gamma(prior.shape)
                if b.spec.free_F:
                    b.F1 = self.rng.uniform(-0.9, 0.9, size=b.p)
                    for l in range(b.p):
                        b.spec.F[l] = np.array([[b.F1[l]]])
                    b.rebuild_structure()
                else:
                    b.refresh_precision()
                init_sd = np.sqrt(np.diag(b.spec.init_cov))
                path = b.path()
                for i in range(b.p):
                    path[i] = b.spec.init_mean + init_sd * self._student_t4(b.q)
                innov_sd = np.sqrt(b.variances)
                for t in range(1, self.n + 1):
                    i = b.p + t - 1
                    mean = np.zeros(b.q)
                    for l in range(1, b.p + 1):
                        mean += b.spec.F[l - 1] @ path[i - l]
                    path[i] = mean + innov_sd * self.rng.standard_normal(b.q)
            eta = self._compute_eta()
            if np.all(np.isfinite(eta)) and np.max(eta, initial=0.0) <= MAX_ETA:
                self.eta = eta
                return
        raise SamplerError(
            f"no finite starting point after {self.s.max_init_attempts} attempts"
        )

    def _compute_eta(self):
        eta = self.a.fixed.design @ self.alpha
        for b in self.blocks:
            eta = eta + np.einsum(
                "tq,tq->t", b.block.design, b.path()[b.p : b.p + self.n]
            )
        return eta

    # -- kernels ----------------------------------------------------------

    def sample_beta_block(self, b: _BlockState):
        rng = self.rng
        n, p, q = self.n, b.p, b.q
        self._draw_initializers(b)
        g = self.s.beta_block_size
        first = int(rng.integers(1, g + 1))
        r = 1
        name = f"beta:{b.block.name}"
        while r <= n:
            s = min(r + (first if r == 1 else g) - 1, n)
            if q == 1:
                accepted = self._propose_block_cached(b, r, s)
            else:
                accepted = self._propose_block_generic(b, r, s)
            self._count(name, accepted)
            r = s + 1

    def _accept_block(self, b, r, s, prop_rows):
        """Likelihood-ratio accept over t in [r, s]; returns True on accept."""
        n = self.n
        i0, i1 = r - 1, s  # 0-based data rows
        path = b.path()
        cur_rows = path[b.p + i0 : b.p + i1]
        d_eta = np.einsum(
            "tq,tq->t", b.block.design[i0:i1], prop_rows - cur_rows
        )
        eta_new = self.eta[i0:i1] + d_eta
        if np.any(eta_new > MAX_ETA) or not np.all(np.isfinite(eta_new)):
            self.divergences += 1
            return False
        y = self.y[i0:i1]
        logr = float(
            np.sum(self.obs.loglik_terms(y, eta_new))
            - np.sum(self.obs.loglik_terms(y, self.eta[i0:i1]))
        )
        if logr >= 0 or np.log(self.rng.random()) < logr:
            path[b.p + i0 : b.p + i1] = prop_rows
            self.eta[i0:i1] += d_eta
            return True
        return False

    def _propose_block_cached(self, b, r, s):
        """q = 1, fixed F: reuse the unit-variance Cholesky factor."""
        sigma2 = b.variances[0]
        fac = b.unit_chol(r, s)
        bvec = ar._cross_term(b.K, b.beta, r, s)
        mean = -sigma2 * cho_solve_banded((fac, False), bvec)
        z = self.rng.standard_normal(mean.shape[0])
        bw = fac.shape[0] - 1
        prop = mean + np.sqrt(sigma2) * solve_banded((0, bw), fac, z)
        return self._accept_block(b, r, s, prop.reshape(-1, 1))

    def _propose_block_generic(self, b, r, s):
        bc = ar.block_conditional(b.K, b.beta, r, s)
        prop = bc.sample(self.rng)
        return self._accept_block(b, r, s, prop.reshape(-1, b.q))

    def _draw_initializers(self, b):
        """Exact Gibbs draw of beta_{-p+1..0}: Gaussian initialiser prior
        times the AR kernel; the data never enter."""
        p, q = b.p, b.q
        m = p * q
        i0, i1 = 0, m
        sub = _sub_from_ab(b.K.ab, i0, i1)
        bw = sub.shape[0] - 1
        Kt = np.zeros((m, m))
        for d in range(bw + 1):
            diag = sub[bw - d, d:]
            idx = np.arange(m - d)
            Kt[idx, idx + d] = diag
            Kt[idx + d, idx] = diag
        bvec = ar._cross_term(b.K, b.beta, -p + 1, 0)
        P0 = np.linalg.inv(b.spec.init_cov)
        mu0 = np.tile(b.spec.init_mean, p)
        A = Kt + np.kron(np.eye(p), P0)
        lin = np.kron(np.eye(p), P0) @ mu0 - bvec
        L = np.linalg.cholesky(A)
        mean = np.linalg.solve(A, lin)
        z = self.rng.standard_normal(m)
        draw = mean + np.linalg.solve(L.T, z)
        b.beta[:m] = draw

    def sample_alpha(self):
        fixed = self.a.fixed
        for i, idx in enumerate(self.alpha_blocks):
            delta = self.alpha_scales[i] * self.rng.standard_normal(idx.size)
            d_eta = fixed.design[:, idx] @ delta
            eta_new = self.eta + d_eta
            if np.any(eta_new > MAX_ETA) or not np.all(np.isfinite(eta_new)):
                self.divergences += 1
                self._count(f"alpha:{i}", False)
                continue
            prop = self.alpha[idx] + delta
            cur = self.alpha[idx]
            mu = fixed.prior_mean[idx]
            v = self.alpha_prior_var[idx]
            logr = float(
                np.sum(self.obs.loglik_terms(self.y, eta_new))
                - np.sum(self.obs.loglik_terms(self.y, self.eta))
                - 0.5 * np.sum((prop - mu) ** 2 / v)
                + 0.5 * np.sum((cur - mu) ** 2 / v)
            )
            accepted = logr >= 0 or np.log(self.rng.random()) < logr
            if accepted:
                self.alpha[idx] = prop
                self.eta = eta_new
            self._count(f"alpha:{i}", accepted)

    def sample_variances(self, b: _BlockState):
        ss = b.innovation_ss()
        changed = False
        for j in range(b.q):
            prior = b._prior(j)
            if prior is None:
                continue
            key = f"var:{b.block.name}:{j}"
            if isinstance(prior, InverseGamma):
                b.variances[j] = variance_gibbs_draw(prior, ss[j], self.n, self.rng)
                self._count(key, True)
                changed = True
            else:
                new, acc = variance_mh_step(
                    prior, b.variances[j], ss[j], self.n, b.var_scales[j], self.rng
                )
                if acc:
                    b.variances[j] = new
                    changed = True
                self._count(key, acc)
        if changed:
            b.refresh_precision()

    def sample_F(self, b: _BlockState):
        if not b.spec.free_F:
            return
        path = b.beta  # q = 1
        sigma2 = b.variances[0]
        if b.p == 1:
            mean, var = f1_full_conditional(path, sigma2)
            b.F1 = np.array([mean + np.sqrt(var) * self.rng.standard_normal()])
        elif b.p == 2:
            mean, cov = f2_full_conditional(path, sigma2)
            L = np.linalg.cholesky(cov)
            b.F1 = mean + L @ self.rng.standard_normal(2)
        else:
            raise SamplerError("free AR coefficients supported for p <= 2")
        for l in range(b.p):
            b.spec.F[l] = np.array([[b.F1[l]]])
        b.rebuild_structure()

    # -- main loop ---------------------------------------------------------

    def sweep(self):
        order = list(range(len(self.blocks)))
        if self.s.randomize_sweep:
            self.rng.shuffle(order)
        for i in order:
            self.sample_beta_block(self.blocks[i])
        self.sample_alpha()
        for b in self.blocks:
            self.sample_variances(b)
        for b in self.blocks:
            self.sample_F(b)

    def run(self, collect):
        self.initialize()
        s = self.s
        for it in range(s.n_burnin):
            self.sweep()
            if (it + 1) % s.adapt_window == 0:
                self._adapt()
            if (it + 1) % 1000 == 0:  # guard against incremental-eta drift
                self.eta = self._compute_eta()
        self.accept = {}
        self._window = {}
        keep = 0
        for it in range(s.n_iterations):
            self.sweep()
            if (it + 1) % 1000 == 0:
                self.eta = self._compute_eta()
            if (it + 1) % s.thin == 0:
                collect(keep, self)
                keep += 1
        return keep


def _allocate(assembled, settings, store_loglik):
    n = assembled.n
    nk = settings.n_retained
    nc = settings.n_chains
    draws = {"alpha": np.empty((nc, nk, assembled.fixed.r))}
    for b in assembled.dynamic:
        p, q = b.spec.p, b.spec.q
        draws[f"beta:{b.name}"] = np.empty((nc, nk, (n + p) * q))
        for j in range(q):
            if j < len(b.spec.variance_priors) and b.spec.variance_priors[j] is not None:
                draws[f"var:{b.name}:{j}"] = np.empty((nc, nk))
        if b.spec.free_F:
            draws[f"F:{b.name}"] = np.empty((nc, nk, b.spec.p))
    if store_loglik:
        draws["loglik"] = np.empty((nc, nk))
    return draws


def run_chain(assembled: AssembledModel, settings: SamplerSettings,
              obs=None) -> PosteriorSamples:
    """Run ``n_chains`` independent chains and collect thinned draws.

    Proposal scales adapt toward the target acceptance rate during
    burn-in only; retained draws come from a fixed-scale chain.
    """
    if obs is None:
        obs = PoissonObs()
    store_loglik = not isinstance(obs, NullObs)
    draws = _allocate(assembled, settings, store_loglik)
    eta_sum = np.zeros(assembled.n)
    acceptance = {}
    divergences = 0
    seeds = np.random.SeedSequence(settings.seed).spawn(settings.n_chains)

    for c in range(settings.n_chains):
        rng = np.random.default_rng(seeds[c])
        runner = _ChainRunner(assembled, settings, obs, rng)

        def collect(k, rn, c=c):
            draws["alpha"][c, k] = rn.alpha
            for b in rn.blocks:
                draws[f"beta:{b.block.name}"][c, k] = b.beta
                for j in range(b.q):
                    key = f"var:{b.block.name}:{j}"
                    if key in draws:
                        draws[key][c, k] = b.variances[j]
                if b.spec.free_F:
                    draws[f"F:{b.block.name}"][c, k] = b.F1
            if store_loglik:
                draws["loglik"][c, k] = float(
                    np.sum(rn.obs.loglik_terms(rn.y, rn.eta))
                )
            eta_sum[:] += rn.eta

        runner.run(collect)
        divergences += runner.divergences
        for key, (acc, tot) in runner.accept.items():
            agg = acceptance.setdefault(key, [0, 0])
            agg[0] += acc
            agg[1] += tot

    nk = settings.n_retained
    rates = {k: (a / t if t else float("nan")) for k, (a, t) in acceptance.items()}
    return PosteriorSamples(
        draws=draws,
        acceptance=rates,
        divergences=divergences,
        settings=settings,
        seed=settings.seed,
        model_id=assembled.config.model_id,
        alpha_names=list(assembled.fixed.names),
        block_info=[(b.name, b.spec.p, b.spec.q) for b in assembled.dynamic],
        n=assembled.n,
        eta_mean=eta_sum / (settings.n_chains * nk) if nk else eta_sum,
    )
