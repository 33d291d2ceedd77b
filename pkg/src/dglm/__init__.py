"""Bayesian dynamic Poisson regression for daily count time series.

Counts are modelled as Poisson with a log-linear predictor combining
fixed effects (splines, indicators, constant covariate effects) and
dynamic coefficients following autoregressive processes (random walks,
local linear trends). Inference is by block Metropolis-Hastings MCMC
with conditional-prior proposals; an iteratively re-weighted Kalman
smoother with AIC variance selection provides a likelihood-based
alternative.
"""

__version__ = "0.1.0"

from .ar import (
    ArError,
    ArPrecision,
    ArProcessSpec,
    InverseGamma,
    TruncatedGaussian,
    block_conditional,
    build_precision,
    llt_spec,
    rw1_spec,
    rw2_spec,
    simulate_ar_path,
)
from .diagnostics import (
    FitSummary,
    acf,
    dic,
    realized_residuals,
    relative_risk,
    rhat,
    summarize_fit,
)
from .kalman import AicResult, KalmanError, aic_search, iwkf_smooth
from .model import (
    MODEL_TABLE,
    DivergenceError,
    GroundTruth,
    Hyperparameters,
    ModelConfig,
    ModelError,
    TimeSeriesDataset,
    assemble_model,
    poisson_loglik,
    simulate_dataset,
)
from .sampler import PosteriorSamples, SamplerError, SamplerSettings, run_chain
from .splines import SplineBasis, SplineError, ncs_basis

__all__ = [
    "ArError", "ArPrecision", "ArProcessSpec", "InverseGamma",
    "TruncatedGaussian", "block_conditional", "build_precision", "llt_spec",
    "rw1_spec", "rw2_spec", "simulate_ar_path",
    "FitSummary", "acf", "dic", "realized_residuals", "relative_risk",
    "rhat", "summarize_fit",
    "AicResult", "KalmanError", "aic_search", "iwkf_smooth",
    "MODEL_TABLE", "DivergenceError", "GroundTruth", "Hyperparameters",
    "ModelConfig", "ModelError", "TimeSeriesDataset", "assemble_model",
    "poisson_loglik", "simulate_dataset",
    "PosteriorSamples", "SamplerError", "SamplerSettings", "run_chain",
    "SplineBasis", "SplineError", "ncs_basis",
    "__version__",
]
