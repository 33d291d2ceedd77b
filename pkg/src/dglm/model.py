"""Poisson dynamic GLM: model family, design assembly, likelihood and
synthetic-data simulation."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import ar
from .ar import ArProcessSpec, InverseGamma, TruncatedGaussian
from .splines import ncs_basis

MAX_ETA = 700.0

# Table of the eight model configurations: id -> (trend, pollution effect)
MODEL_TABLE = {
    1: ("spline", "constant"),
    2: ("spline", "rw1"),
    3: ("rw1", "constant"),
    4: ("rw1", "rw1"),
    5: ("rw2", "constant"),
    6: ("rw2", "rw1"),
    7: ("llt", "constant"),
    8: ("llt", "rw1"),
}
MODEL_IDS = {v: k for k, v in MODEL_TABLE.items()}


class ModelError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"linear predictor overflow at t={t}")


@dataclass
class TimeSeriesDataset:
    """Daily counts with named covariate series of equal length."""
    y: np.ndarray
    covariates: dict
    dates: list | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y)
        if self.y.ndim != 1 or self.y.size < 1:
            raise ModelError("y must be a non-empty vector")
        if np.any(self.y < 0) or not np.all(self.y == np.floor(self.y)):
            raise ModelError("counts must be non-negative integers")
        self.y = self.y.astype(np.int64)
        cov = {}
        for name, series in self.covariates.items():
            arr = np.asarray(series, dtype=float)
            if arr.shape != self.y.shape:
                raise ModelError(f"covariate {name!r} length mismatch")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"covariate {name!r} has non-finite values")
            cov[name] = arr
        self.covariates = cov

    @property
    def n(self):
        return self.y.size

    @property
    def t(self):
        return np.arange(1, self.n + 1)


@dataclass
class Hyperparameters:
    """Prior settings; defaults follow the elicitation for daily mortality."""
    g1: float = 1e-10   # time-varying pollution effect variance
    g2: float = 1e-7    # first order random walk trend
    g3: float = 1e-14   # second order random walk trend
    g4: float = 1e-16   # local linear trend, level
    g5: float = 1e-16   # local linear trend, slope
    level_mean: float = 3.5
    level_var: float = 10.0
    slope_var: float = 10.0
    gamma0_var: float = 10.0
    intercept_mean: float = 3.5
    intercept_var: float = 10.0
    coef_var: float = 100.0  # non-informative prior for spline/indicator coefficients


@dataclass
class ModelConfig:
    model_id: int = 1
    trend: str = "spline"              # spline | rw1 | rw2 | llt
    pollution_effect: str = "constant"  # constant | rw1
    pollution_lag: int = 1
    temperature_df: int = 3
    calendar_df: int = 27
    day_of_week: bool = False
    hyper: Hyperparameters = field(default_factory=Hyperparameters)

    @classmethod
    def from_model_id(cls, model_id, **kwargs):
        if model_id not in MODEL_TABLE:
            raise ModelError(f"unknown model_id {model_id}")
        trend, effect = MODEL_TABLE[model_id]
        return cls(model_id=model_id, trend=trend, pollution_effect=effect, **kwargs)

    def __post_init__(self):
        key = (self.trend, self.pollution_effect)
        if key not in MODEL_IDS:
            raise ModelError(f"unknown (trend, effect) pair {key}")
        if MODEL_IDS[key] != self.model_id:
            raise ModelError(
                f"model_id {self.model_id} does not match (trend, effect) {key}: "
                f"expected {MODEL_IDS[key]}"
            )
        if self.pollution_lag < 0:
            raise ModelError("pollution_lag must be >= 0")
        if self.temperature_df < 1 or self.calendar_df < 1:
            raise ModelError("spline df must be >= 1")


@dataclass
class FixedEffectBlock:
    """Standardised fixed-effect design with its Gaussian prior."""
    design: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    names: list
    col_means: np.ndarray
    col_sds: np.ndarray

    @property
    def r(self):
        return self.design.shape[1]


@dataclass
class DynamicEffectBlock:
    """A dynamic-coefficient block: covariate columns x_t and AR spec."""
    name: str
    design: np.ndarray  # n x q
    spec: ArProcessSpec
    scale: float = 1.0  # covariate standardisation scale for back-transform

    @property
    def q(self):
        return self.spec.q


@dataclass
class AssembledModel:
    """Trimmed, standardised design ready for sampling."""
    y: np.ndarray
    fixed: FixedEffectBlock
    dynamic: list
    config: ModelConfig
    lag_offset: int
    pollutant_sd: float
    dataset: TimeSeriesDataset

    @property
    def n(self):
        return self.y.size


def _standardize(col, name):
    m = col.mean()
    s = col.std()
    if s == 0.0:
        raise ModelError(f"constant covariate column {name!r} (zero standard deviation)")
    return (col - m) / s, m, s


def assemble_model(dataset: TimeSeriesDataset, config: ModelConfig) -> AssembledModel:
    """Build the standardised fixed and dynamic design blocks.

    The first ``pollution_lag`` days are dropped so that y_t aligns with
    the lagged pollutant.  Spline trends live in the fixed block with a
    fixed intercept; dynamic trends absorb the intercept (x_t = 1).
    """
    h = config.hyper
    lag = config.pollution_lag
    n_raw = dataset.n
    if n_raw <= lag:
        raise ModelError(f"series length {n_raw} cannot support lag {lag}")
    if "pm10" not in dataset.covariates or "temperature" not in dataset.covariates:
        raise ModelError("dataset must provide 'pm10' and 'temperature' covariates")

    keep = slice(lag, n_raw)  # rows t = lag+1 .. n
    y = dataset.y[keep]
    n = y.size
    pm10_lagged = dataset.covariates["pm10"][: n_raw - lag] if lag > 0 else dataset.covariates["pm10"]
    temp = dataset.covariates["temperature"][keep]
    t_index = dataset.t[keep].astype(float)

    cols, names, means, sds, pmean, pvar = [], [], [], [], [], []

    def add_fixed(col, name, mean, var, standardize=True):
        if standardize:
            col, m, s = _standardize(col, name)
        else:
            m, s = 0.0, 1.0
        cols.append(col)
        names.append(name)
        means.append(m)
        sds.append(s)
        pmean.append(mean)
        pvar.append(var)

    if config.trend == "spline":
        add_fixed(np.ones(n), "intercept", h.intercept_mean, h.intercept_var,
                  standardize=False)
        cal = ncs_basis(t_index, config.calendar_df)
        for j in range(config.calendar_df):
            add_fixed(cal.basis[:, j], f"calendar_s{j + 1}", 0.0, h.coef_var)

    tb = ncs_basis(temp, config.temperature_df)
    for j in range(config.temperature_df):
        add_fixed(tb.basis[:, j], f"temperature_s{j + 1}", 0.0, h.coef_var)

    pm_std, pm_mean, pm_sd = _standardize(pm10_lagged, "pm10")
    if config.pollution_effect == "constant":
        cols.append(pm_std)
        names.append("pm10")
        means.append(pm_mean)
        sds.append(pm_sd)
        pmean.append(0.0)
        pvar.append(h.gamma0_var)

    if config.day_of_week:
        start = lag  # day index of first kept row, 0-based
        dow = (np.arange(start, n_raw) % 7)
        for d in range(1, 7):
            add_fixed((dow == d).astype(float), f"dow_{d}", 0.0, h.coef_var)

    fixed = FixedEffectBlock(
        design=np.column_stack(cols),
        prior_mean=np.array(pmean),
        prior_cov=np.diag(pvar),
        names=names,
        col_means=np.array(means),
        col_sds=np.array(sds),
    )

    dynamic = []
    if config.trend == "rw1":
        spec = ar.rw1_spec(0.5 * h.g2**0.5, mu0=h.level_mean, sigma0=h.level_var,
                           prior=TruncatedGaussian(h.g2))
        dynamic.append(DynamicEffectBlock("trend", np.ones((n, 1)), spec))
    elif config.trend == "rw2":
        spec = ar.rw2_spec(0.5 * h.g3**0.5, mu0=h.level_mean, sigma0=h.level_var,
                           prior=TruncatedGaussian(h.g3))
        dynamic.append(DynamicEffectBlock("trend", np.ones((n, 1)), spec))
    elif config.trend == "llt":
        spec = ar.llt_spec(0.5 * h.g4**0.5, 0.5 * h.g5**0.5, mu0=h.level_mean,
                           sigma0=h.level_var, delta0_var=h.slope_var,
                           priors=[TruncatedGaussian(h.g4), TruncatedGaussian(h.g5)])
        design = np.zeros((n, 2))
        design[:, 0] = 1.0  # eta only sees the level component
        dynamic.append(DynamicEffectBlock("trend", design, spec))

    if config.pollution_effect == "rw1":
        spec = ar.rw1_spec(0.5 * h.g1**0.5, mu0=0.0, sigma0=h.gamma0_var,
                           prior=TruncatedGaussian(h.g1))
        dynamic.append(
            DynamicEffectBlock("pollution", pm_std.reshape(-1, 1), spec, scale=pm_sd)
        )

    return AssembledModel(y=y, fixed=fixed, dynamic=dynamic, config=config,
                          lag_offset=lag, pollutant_sd=pm_sd, dataset=dataset)


def linear_predictor(alpha, betas, assembled: AssembledModel):
    """eta_t = sum_blocks x_t' beta_t + z_t' alpha.

    ``betas`` holds one stacked ((n+p) q,) vector per dynamic block;
    rows -p+1..0 are initialisers and do not enter eta.
    """
    n = assembled.n
    eta = assembled.fixed.design @ np.asarray(alpha, dtype=float)
    for block, beta in zip(assembled.dynamic, betas):
        p, q = block.spec.p, block.spec.q
        path = np.asarray(beta, dtype=float).reshape(-1, q)
        eta = eta + np.einsum("tq,tq->t", block.design, path[p : p + n])
    if np.any(eta > MAX_ETA) or not np.all(np.isfinite(eta)):
        bad = np.where(~np.isfinite(eta) | (eta > MAX_ETA))[0]
        raise DivergenceError(int(bad[0]) + 1)
    return eta


def poisson_loglik(y, mu):
    """sum_t [y_t ln(mu_t) - mu_t - ln(y_t!)], with the factorial term
    kept so deviances are comparable across models."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise ModelError("Poisson mean must be positive")
    return float(np.sum(y * np.log(mu) - mu - gammaln(y + 1.0)))


class PoissonObs:
    """Poisson observation model on the log link."""

    name = "poisson"

    def loglik_terms(self, y, eta):
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def working(self, y, eta):
        mu = np.exp(eta)
        return eta + (y - mu) / mu, 1.0 / mu


class GaussianObs:
    """Gaussian surrogate y_t ~ N(eta_t, sigma2); used for exact-posterior
    cross-checks of the sampler and smoother."""

    name = "gaussian"

    def __init__(self, sigma2=1.0):
        self.sigma2 = float(sigma2)

    def loglik_terms(self, y, eta):
        return -0.5 * ((y - eta) ** 2 / self.sigma2 + np.log(2 * np.pi * self.sigma2))

    def working(self, y, eta):
        return np.asarray(y, dtype=float), np.full(np.shape(y), self.sigma2)


@dataclass
class GroundTruth:
    """Parameter set for synthetic data; unset paths are drawn from the
    configured processes."""
    trend_path: np.ndarray | None = None   # log scale, length n
    trend_tau2: float | None = None
    trend_psi2: float | None = None
    gamma: float | None = None             # per-unit pollutant effect
    gamma_path: np.ndarray | None = None   # per-unit, length n
    gamma_sigma2: float | None = None
    temp_coefs: np.ndarray | None = None   # on the standardised temperature basis
    level: float = 3.5


def _simulate_covariates(n, rng):
    t = np.arange(1, n + 1)
    temperature = 11.0 + 8.0 * np.sin(2 * np.pi * (t - 120) / 365.25) \
        + rng.normal(0.0, 2.0, size=n)
    z = np.empty(n)
    z[0] = np.log(25.0)
    for i in range(1, n):  # positive AR(1) on the log scale
        z[i] = np.log(25.0) + 0.7 * (z[i - 1] - np.log(25.0)) + rng.normal(0.0, 0.25)
    pm10 = np.exp(z)
    return temperature, pm10


def simulate_dataset(config: ModelConfig, truth: GroundTruth, n: int, seed):
    """Simulate a dataset of length n from the configured model.

    Returns (dataset, record) where the record holds the realised trend
    and effect paths (aligned with day index 1..n) for recovery scoring.
    """
    rng = np.random.default_rng(seed)
    h = config.hyper
    temperature, pm10 = _simulate_covariates(n, rng)

    # trend path on the log scale
    if truth.trend_path is not None:
        trend = np.asarray(truth.trend_path, dtype=float)
        if trend.size != n:
            raise ModelError("trend_path length mismatch")
    elif config.trend == "spline":
        t = np.arange(1, n + 1)
        trend = truth.level + 0.35 * np.sin(2 * np.pi * t / 365.25)
    else:
        if config.trend == "rw1":
            tau2 = h.g2 if truth.trend_tau2 is None else truth.trend_tau2
            spec = ar.rw1_spec(tau2, mu0=truth.level, sigma0=0.0)
        elif config.trend == "rw2":
            tau2 = h.g3 if truth.trend_tau2 is None else truth.trend_tau2
            spec = ar.rw2_spec(tau2, mu0=truth.level, sigma0=0.0)
        else:
            tau2 = h.g4 if truth.trend_tau2 is None else truth.trend_tau2
            psi2 = h.g5 if truth.trend_psi2 is None else truth.trend_psi2
            spec = ar.llt_spec(tau2, psi2, mu0=truth.level, sigma0=0.0, delta0_var=0.0)
        path = ar.simulate_ar_path(spec, n, rng)
        trend = path[spec.p :, 0]

    # pollutant effect path, per raw unit
    if truth.gamma_path is not None:
        gamma = np.asarray(truth.gamma_path, dtype=float)
        if gamma.size != n:
            raise ModelError("gamma_path length mismatch")
    elif truth.gamma is not None:
        gamma = np.full(n, float(truth.gamma))
    elif config.pollution_effect == "rw1":
        s2 = h.g1 if truth.gamma_sigma2 is None else truth.gamma_sigma2
        spec = ar.rw1_spec(s2, mu0=0.0, sigma0=0.0)
        gamma = ar.simulate_ar_path(spec, n, rng)[1:, 0]
    else:
        gamma = np.zeros(n)

    # temperature effect through a standardised spline basis
    temp_std = (temperature - temperature.mean()) / temperature.std()
    if truth.temp_coefs is not None:
        coefs = np.asarray(truth.temp_coefs, dtype=float)
        tb = ncs_basis(temp_std, coefs.size)
        cols = tb.basis
        cols = (cols - cols.mean(axis=0)) / cols.std(axis=0)
        temp_effect = cols @ coefs
    else:
        temp_effect = np.zeros(n)

    lag = config.pollution_lag
    pm_lagged = np.empty(n)
    pm_lagged[lag:] = pm10[: n - lag] if lag > 0 else pm10
    pm_lagged[:lag] = pm10[0]
    eta = trend + gamma * pm_lagged + temp_effect
    # counts must stay representable; the Poisson sampler caps lambda well
    # below the exp overflow point
    max_sim_eta = np.log(np.iinfo(np.int64).max / 2.0)
    if np.any(eta > max_sim_eta):
        raise DivergenceError(int(np.argmax(eta > max_sim_eta)) + 1)
    y = rng.poisson(np.exp(eta))

    dataset = TimeSeriesDataset(y=y, covariates={"pm10": pm10, "temperature": temperature})
    record = {
        "trend": trend,
        "gamma": gamma,
        "temp_effect": temp_effect,
        "eta": eta,
        "trend_tau2": truth.trend_tau2,
        "gamma_sigma2": truth.gamma_sigma2,
    }
    return dataset, record
