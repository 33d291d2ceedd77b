"""Command line interface: config parsing, CSV ingestion and the
fit / simulate / score / diagnose pipelines."""

import argparse
import csv
import datetime
import json
import sys
import time

import numpy as np

from . import __version__
from .ar import ArError
from .diagnostics import DiagnosticsError, acf, summarize_fit
from .kalman import KalmanError, aic_search, default_variance_grid, iwkf_smooth
from .model import (
    DivergenceError,
    GroundTruth,
    ModelConfig,
    ModelError,
    Hyperparameters,
    TimeSeriesDataset,
    assemble_model,
    simulate_dataset,
)
from .sampler import PosteriorSamples, SamplerError, SamplerSettings, run_chain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

def parse_config(path):
    """Read a flat ``section.key = value`` text file into a string dict.

    Blank lines and ``#`` comments are ignored; later keys override
    earlier ones."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                key, value = key.strip(), value.strip()
                if not key:
                    raise ConfigError(f"{path}:{lineno}: empty key")
                out[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return out


def _conv(cfg, key, convert, default):
    if key not in cfg:
        return default
    try:
        return convert(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def _get_int(cfg, key, default=None):
    return _conv(cfg, key, int, default)


def _get_float(cfg, key, default=None):
    return _conv(cfg, key, float, default)


def _get_bool(cfg, key, default=False):
    def parse(s):
        s = s.lower()
        if s in ("true", "yes", "1", "on"):
            return True
        if s in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {s!r}")
    return _conv(cfg, key, parse, default)


def model_config_from(cfg):
    hyper = Hyperparameters(
        g1=_get_float(cfg, "priors.g1", 1e-10),
        g2=_get_float(cfg, "priors.g2", 1e-7),
        g3=_get_float(cfg, "priors.g3", 1e-14),
        g4=_get_float(cfg, "priors.g4", 1e-16),
        g5=_get_float(cfg, "priors.g5", 1e-16),
        level_mean=_get_float(cfg, "priors.level_mean", 3.5),
        level_var=_get_float(cfg, "priors.level_var", 10.0),
        slope_var=_get_float(cfg, "priors.slope_var", 10.0),
        gamma0_var=_get_float(cfg, "priors.gamma0_var", 10.0),
        intercept_mean=_get_float(cfg, "priors.intercept_mean", 3.5),
        intercept_var=_get_float(cfg, "priors.intercept_var", 10.0),
        coef_var=_get_float(cfg, "priors.coef_var", 100.0),
    )
    for name in ("g1", "g2", "g3", "g4", "g5", "level_var", "gamma0_var",
                 "intercept_var", "coef_var"):
        if getattr(hyper, name) <= 0:
            raise ConfigError(f"priors.{name} must be positive")
    kwargs = dict(
        pollution_lag=_get_int(cfg, "model.pollution_lag", 1),
        temperature_df=_get_int(cfg, "model.temperature_df", 3),
        calendar_df=_get_int(cfg, "model.calendar_df", 27),
        day_of_week=_get_bool(cfg, "model.day_of_week", False),
        hyper=hyper,
    )
    try:
        if "model.trend" in cfg or "model.effect" in cfg:
            from .model import MODEL_IDS
            trend = cfg.get("model.trend", "spline")
            effect = cfg.get("model.effect", "constant")
            if (trend, effect) not in MODEL_IDS:
                raise ConfigError(f"unknown model pair ({trend}, {effect})")
            mid = MODEL_IDS[(trend, effect)]
            declared = _get_int(cfg, "model.id", mid)
            if declared != mid:
                raise ConfigError(
                    f"model.id {declared} conflicts with (trend, effect) -> {mid}")
            return ModelConfig.from_model_id(mid, **kwargs)
        return ModelConfig.from_model_id(_get_int(cfg, "model.id", 1), **kwargs)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc


def sampler_settings_from(cfg, seed_override=None):
    seed = seed_override if seed_override is not None else _get_int(cfg, "sampler.seed", 0)
    settings = SamplerSettings(
        n_burnin=_get_int(cfg, "sampler.n_burnin", 40000),
        n_iterations=_get_int(cfg, "sampler.n_iterations", 100000),
        thin=_get_int(cfg, "sampler.thin", 5),
        beta_block_size=_get_int(cfg, "sampler.beta_block_size", 20),
        alpha_block_size=_get_int(cfg, "sampler.alpha_block_size", 4),
        n_chains=_get_int(cfg, "sampler.n_chains", 2),
        seed=seed,
    )
    if settings.n_iterations < 1 or settings.thin < 1 or settings.n_chains < 1:
        raise ConfigError("sampler.n_iterations/thin/n_chains must be >= 1")
    return settings


DEFAULT_BINDINGS = {
    "count": "y", "pollutant": "pm10", "temperature": "temperature",
    "date": "date",
}


def bindings_from(cfg):
    return {
        "count": cfg.get("io.count_column", DEFAULT_BINDINGS["count"]),
        "pollutant": cfg.get("io.pollutant_column", DEFAULT_BINDINGS["pollutant"]),
        "temperature": cfg.get("io.temperature_column", DEFAULT_BINDINGS["temperature"]),
        "date": cfg.get("io.date_column", DEFAULT_BINDINGS["date"]),
    }


# ---------------------------------------------------------------------------
# CSV ingestion / emission

def ingest_csv(path, bindings=None) -> TimeSeriesDataset:
    """Read a daily time series CSV into a dataset.

    Requires ISO-8601 dates on consecutive days, non-negative integer
    counts and finite covariates; errors carry the offending file row."""
    bindings = dict(DEFAULT_BINDINGS, **(bindings or {}))
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        cols = {}
        for role in ("count", "pollutant", "temperature", "date"):
            name = bindings[role]
            if name not in header:
                raise DataError(f"{path}: missing column {name!r}")
            cols[role] = header.index(name)
        y, pm10, temp, dates = [], [], [], []
        prev_date = None
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{rowno}: expected {len(header)} fields")
            try:
                d = datetime.date.fromisoformat(row[cols["date"]].strip())
            except ValueError:
                raise DataError(
                    f"{path}:{rowno}: bad date {row[cols['date']]!r} "
                    "(expected YYYY-MM-DD)") from None
            if prev_date is not None and d != prev_date + datetime.timedelta(days=1):
                raise DataError(
                    f"{path}:{rowno}: date {d.isoformat()} does not follow "
                    f"{prev_date.isoformat()} by one day")
            prev_date = d
            raw = row[cols["count"]].strip()
            try:
                count = int(raw)
            except ValueError:
                raise DataError(
                    f"{path}:{rowno}: count column {bindings['count']!r} "
                    f"value {raw!r} is not an integer") from None
            if count < 0:
                raise DataError(f"{path}:{rowno}: negative count {count}")
            for role, store in (("pollutant", pm10), ("temperature", temp)):
                raw = row[cols[role]].strip()
                try:
                    val = float(raw)
                except ValueError:
                    raise DataError(
                        f"{path}:{rowno}: column {bindings[role]!r} value "
                        f"{raw!r} is not a number") from None
                if not np.isfinite(val):
                    raise DataError(
                        f"{path}:{rowno}: column {bindings[role]!r} is not finite")
                store.append(val)
            y.append(count)
            dates.append(d.isoformat())
    if not y:
        raise DataError(f"{path}: no data rows")
    return TimeSeriesDataset(
        y=np.array(y), covariates={"pm10": np.array(pm10),
                                   "temperature": np.array(temp)},
        dates=dates,
    )


def _write_table(path, header, rows, note=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if note:
            fh.write(f"# {note}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_table(path):
    """Read back a CSV written by :func:`_write_table` (skipping ``#`` notes)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# fit pipeline

def _save_samples_npz(path, samples: PosteriorSamples):
    meta = {
        "acceptance": samples.acceptance,
        "divergences": samples.divergences,
        "seed": samples.seed,
        "model_id": samples.model_id,
        "alpha_names": samples.alpha_names,
        "n": samples.n,
        "settings": {
            "n_burnin": samples.settings.n_burnin,
            "n_iterations": samples.settings.n_iterations,
            "thin": samples.settings.thin,
            "beta_block_size": samples.settings.beta_block_size,
            "n_chains": samples.settings.n_chains,
            "seed": samples.settings.seed,
        },
    }
    arrays = {f"draw:{k}": v for k, v in samples.draws.items()}
    arrays["eta_mean"] = samples.eta_mean
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    np.savez_compressed(path, **arrays)


def load_samples_npz(path) -> PosteriorSamples:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        draws = {k[len("draw:"):]: data[k] for k in data.files
                 if k.startswith("draw:")}
        eta_mean = data["eta_mean"]
    s = meta["settings"]
    settings = SamplerSettings(
        n_burnin=s["n_burnin"], n_iterations=s["n_iterations"], thin=s["thin"],
        beta_block_size=s["beta_block_size"], n_chains=s["n_chains"],
        seed=s["seed"])
    return PosteriorSamples(
        draws=draws, acceptance=meta["acceptance"],
        divergences=meta["divergences"], settings=settings, seed=meta["seed"],
        model_id=meta["model_id"], alpha_names=meta["alpha_names"],
        block_info={}, n=meta["n"], eta_mean=eta_mean)


def _save_samples_csv(path, samples: PosteriorSamples):
    names, columns = [], []
    for key, d in samples.draws.items():
        flat = d.reshape(d.shape[0] * d.shape[1], -1)
        for j in range(flat.shape[1]):
            names.append(key if flat.shape[1] == 1 else f"{key}[{j}]")
            columns.append(flat[:, j])
    chain = np.repeat(np.arange(samples.draws["alpha"].shape[0]),
                      samples.n_retained)
    _write_table(path, ["chain"] + names,
                 zip(chain, *columns),
                 note="retained posterior draws (standardized covariate scale)")


def _write_fit_outputs(out, samples, assembled, summary, dates, fmt):
    import pathlib
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        _save_samples_npz(out / "samples.npz", samples)
    else:
        _save_samples_csv(out / "samples.csv", samples)

    rows = []
    for name, q in summary.parameter_quantiles.items():
        rows.append([name, q[0], q[1], q[2], summary.rhat.get(name, float("nan"))])
    rows.append(["DIC", "", summary.dic, "", ""])
    rows.append(["pD", "", summary.pd, "", ""])
    rows.append(["mean_deviance", "", summary.mean_deviance, "", ""])
    for k, v in summary.acceptance.items():
        rows.append([f"acceptance:{k}", "", v, "", ""])
    rows.append(["divergences", "", summary.divergences, "", ""])
    _write_table(out / "summary.csv",
                 ["parameter", "q2.5", "median", "q97.5", "rhat"], rows,
                 note="parameter quantiles on the standardized covariate scale; "
                      "relative_risk per 10-unit pollutant increment")

    n = assembled.n
    day = np.arange(1, n + 1) + assembled.lag_offset
    dts = dates[assembled.lag_offset:] if dates else [""] * n
    _write_table(out / "trend.csv",
                 ["day", "date", "median", "q2.5", "q97.5"],
                 zip(day, dts, summary.trend_quantiles[:, 1],
                     summary.trend_quantiles[:, 0], summary.trend_quantiles[:, 2]),
                 note="trend component on the expected-count scale (exp of the "
                      "trend linear predictor)")

    rr = summary.effect_rr_quantiles
    if summary.effect_time_varying:
        _write_table(out / "effect.csv",
                     ["day", "date", "rr_median", "rr_q2.5", "rr_q97.5"],
                     zip(day, dts, rr[:, 1], rr[:, 0], rr[:, 2]),
                     note="relative risk per 10-unit pollutant increment, per day")
    else:
        _write_table(out / "effect.csv",
                     ["day", "date", "rr_median", "rr_q2.5", "rr_q97.5"],
                     [["all", "", rr[0, 1], rr[0, 0], rr[0, 2]]],
                     note="relative risk per 10-unit pollutant increment (constant)")

    _write_table(out / "residual_acf.csv",
                 ["lag", "acf", "band"],
                 [(k, summary.residual_acf[k], summary.acf_band)
                  for k in range(summary.residual_acf.size)],
                 note="sample ACF of posterior-median Pearson residuals; band "
                      "is the +/-1.96/sqrt(n) significance half-width")


def _write_kalman_outputs(out, assembled, smooth, aic, dates):
    import pathlib
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    n = assembled.n
    day = np.arange(1, n + 1) + assembled.lag_offset
    dts = dates[assembled.lag_offset:] if dates else [""] * n

    # trend on the count scale with a delta-method interval
    trend_idx = None
    for i, b in enumerate(assembled.dynamic):
        if b.name == "trend":
            trend_idx = i
    if trend_idx is not None:
        mean = smooth.beta_means[trend_idx][:, 0]
        sd = np.sqrt(np.maximum(smooth.beta_vars[trend_idx][:, 0], 0.0))
    else:
        names = assembled.fixed.names
        cols = [i for i, nm in enumerate(names)
                if nm == "intercept" or nm.startswith("calendar_s")]
        X = assembled.fixed.design[:, cols]
        mean = X @ smooth.alpha[cols]
        sd = np.zeros(n)
    _write_table(out / "trend_kalman.csv",
                 ["day", "date", "estimate", "lo", "hi"],
                 zip(day, dts, np.exp(mean), np.exp(mean - 1.96 * sd),
                     np.exp(mean + 1.96 * sd)),
                 note="likelihood (smoother) trend on the expected-count scale; "
                      "interval is a plug-in normal approximation")

    if aic is not None:
        rows = []
        for point, a, ll, edf, conv in aic.table:
            key = ";".join(f"{nm}[{j}]={v:.6g}" for (nm, j), v in point.items())
            rows.append([key, a, ll, edf, conv])
        _write_table(out / "aic.csv",
                     ["variances", "aic", "loglik", "edf", "converged"], rows,
                     note="AIC grid search over evolution variances; "
                          f"best={aic.best_aic!r} boundary_hit={aic.boundary_hit}")


def _manifest(out, config_resolved, seed, t0, extra=None):
    import pathlib
    import platform
    payload = {
        "config": config_resolved,
        "seed": seed,
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(time.time() - t0, 3),
    }
    try:
        import scipy
        payload["versions"]["scipy"] = scipy.__version__
    except ImportError:
        pass
    if extra:
        payload.update(extra)
    with open(pathlib.Path(out) / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def run_fit(cfg, out, seed=None, estimator="bayes", fmt="csv"):
    """Fit the configured model to the bound CSV and write all artefacts."""
    t0 = time.time()
    if "io.data" not in cfg:
        raise ConfigError("config key io.data (input CSV path) is required")
    mc = model_config_from(cfg)
    dataset = ingest_csv(cfg["io.data"], bindings_from(cfg))
    assembled = assemble_model(dataset, mc)
    dates = dataset.dates

    aic = None
    smooth = None
    samples = None
    flags = []
    if estimator in ("kalman", "both"):
        grids = None
        if assembled.dynamic:
            grid = default_variance_grid(
                _get_float(cfg, "kalman.grid_lo", 1e-8),
                _get_float(cfg, "kalman.grid_hi", 1.0),
                _get_int(cfg, "kalman.grid_points", 17))
            grids = {(b.name, j): grid for b in assembled.dynamic
                     for j in range(b.spec.q)}
            aic = aic_search(assembled, grids=grids)
            for b in assembled.dynamic:
                for j in range(b.spec.q):
                    b.spec.sigma_beta[j, j] = aic.best[(b.name, j)]
            if aic.boundary_hit:
                flags.append("aic grid boundary hit")
        smooth = iwkf_smooth(assembled)
        if not smooth.converged:
            flags.append("smoother did not converge")
        _write_kalman_outputs(out, assembled, smooth, aic, dates)
    if estimator in ("bayes", "both"):
        settings = sampler_settings_from(cfg, seed_override=seed)
        samples = run_chain(assembled, settings)
        summary = summarize_fit(samples, assembled)
        _write_fit_outputs(out, samples, assembled, summary, dates, fmt)
    _manifest(out, dict(cfg), seed if seed is not None else cfg.get("sampler.seed", "0"),
              t0, extra={"estimator": estimator, "flags": flags,
                         "model_id": mc.model_id})
    for f in flags:
        print(f"warning: {f}", file=sys.stderr)
    return samples, smooth, aic


# ---------------------------------------------------------------------------
# simulate / score pipelines

def run_simulate(cfg, out, seed=None):
    """Simulate a dataset from the configured model; write data and truth CSVs."""
    import pathlib
    t0 = time.time()
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mc = model_config_from(cfg)
    n = _get_int(cfg, "simulate.n", 1095)
    if n < 2:
        raise ConfigError("simulate.n must be >= 2")
    the_seed = seed if seed is not None else _get_int(cfg, "simulate.seed", 0)
    truth = GroundTruth(
        trend_tau2=_get_float(cfg, "truth.trend_tau2"),
        trend_psi2=_get_float(cfg, "truth.trend_psi2"),
        gamma=_get_float(cfg, "truth.gamma"),
        gamma_sigma2=_get_float(cfg, "truth.gamma_sigma2"),
        level=_get_float(cfg, "truth.level", 3.5),
    )
    dataset, record = simulate_dataset(mc, truth, n, the_seed)
    start = datetime.date(1995, 1, 1)
    dates = [(start + datetime.timedelta(days=i)).isoformat() for i in range(n)]
    _write_table(out / "data.csv", ["date", "y", "pm10", "temperature"],
                 zip(dates, dataset.y, dataset.covariates["pm10"],
                     dataset.covariates["temperature"]))
    _write_table(out / "truth.csv",
                 ["day", "trend_log", "gamma_per_unit", "eta"],
                 zip(np.arange(1, n + 1), record["trend"], record["gamma"],
                     record["eta"]),
                 note="trend on the log (linear-predictor) scale; gamma per "
                      "raw pollutant unit")
    _manifest(out, dict(cfg), the_seed, t0, extra={"n": n})
    return dataset, record


def run_recovery_score(fit_dir, truth_path, out=None):
    """Compare a fit directory against a simulation truth file.

    Reports RMSE of the posterior median, 95% interval coverage and the
    peak-day height error for the trend, plus the same for the pollutant
    relative risk."""
    import pathlib
    fit_dir = pathlib.Path(fit_dir)
    _, truth_rows = read_table(truth_path)
    truth_day = np.array([int(r[0]) for r in truth_rows])
    truth_trend = np.array([float(r[1]) for r in truth_rows])
    truth_gamma = np.array([float(r[2]) for r in truth_rows])

    _, trend_rows = read_table(fit_dir / "trend.csv")
    fit_day = np.array([int(r[0]) for r in trend_rows])
    med = np.array([float(r[2]) for r in trend_rows])
    lo = np.array([float(r[3]) for r in trend_rows])
    hi = np.array([float(r[4]) for r in trend_rows])
    idx = {d: i for i, d in enumerate(truth_day)}
    try:
        sel = np.array([idx[d] for d in fit_day])
    except KeyError as exc:
        raise DataError(f"fit day {exc} missing from truth file") from exc
    tt = np.exp(truth_trend[sel])  # count scale
    report = {
        "trend_rmse": float(np.sqrt(np.mean((med - tt) ** 2))),
        "trend_coverage": float(np.mean((lo <= tt) & (tt <= hi))),
    }
    k_fit, k_true = int(np.argmax(med)), int(np.argmax(tt))
    report["trend_peak_day_error"] = abs(int(fit_day[k_fit]) - int(fit_day[k_true]))
    report["trend_peak_height_error"] = float(med[k_fit] - tt[k_true])

    _, eff_rows = read_table(fit_dir / "effect.csv")
    rr_true = np.exp(10.0 * truth_gamma[sel])
    if len(eff_rows) == 1 and eff_rows[0][0] == "all":
        med_rr, lo_rr, hi_rr = (float(eff_rows[0][i]) for i in (2, 3, 4))
        if np.ptp(rr_true) > 1e-12:
            raise DataError("constant-effect fit scored against varying truth")
        report["rr_rmse"] = abs(med_rr - rr_true[0])
        report["rr_coverage"] = float(lo_rr <= rr_true[0] <= hi_rr)
    else:
        med_rr = np.array([float(r[2]) for r in eff_rows])
        lo_rr = np.array([float(r[3]) for r in eff_rows])
        hi_rr = np.array([float(r[4]) for r in eff_rows])
        report["rr_rmse"] = float(np.sqrt(np.mean((med_rr - rr_true) ** 2)))
        report["rr_coverage"] = float(np.mean((lo_rr <= rr_true) & (rr_true <= hi_rr)))

    if out is not None:
        _write_table(out, ["metric", "value"],
                     sorted(report.items()),
                     note="recovery metrics: trend on the expected-count scale, "
                          "rr per 10-unit pollutant increment")
    return report


def run_diagnose(cfg, samples_path, out):
    """Recompute the diagnostics for a stored binary samples file."""
    if "io.data" not in cfg:
        raise ConfigError("config key io.data (input CSV path) is required")
    t0 = time.time()
    mc = model_config_from(cfg)
    dataset = ingest_csv(cfg["io.data"], bindings_from(cfg))
    assembled = assemble_model(dataset, mc)
    samples = load_samples_npz(samples_path)
    if samples.model_id != mc.model_id:
        raise DataError(
            f"samples were drawn for model {samples.model_id}, config says "
            f"{mc.model_id}")
    if samples.n != assembled.n:
        raise DataError("samples length does not match the bound dataset")
    summary = summarize_fit(samples, assembled)
    _write_fit_outputs(out, samples, assembled, summary, dataset.dates, "binary")
    _manifest(out, dict(cfg), samples.seed, t0,
              extra={"samples_file": str(samples_path)})
    return summary


# ---------------------------------------------------------------------------
# entry point

def build_parser():
    parser = argparse.ArgumentParser(
        prog="dglm",
        description="Bayesian dynamic Poisson regression for daily count "
                    "series with time-varying trends and covariate effects.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", required=True, help="output directory")

    p_fit = sub.add_parser("fit", help="fit a model to a CSV time series")
    common(p_fit)
    p_fit.add_argument("--estimator", choices=("bayes", "kalman", "both"),
                       default="bayes")
    p_fit.add_argument("--model", type=int, choices=range(1, 9), default=None,
                       help="model id override")
    p_fit.add_argument("--format", choices=("csv", "binary"), default="csv",
                       help="samples file format")

    p_sim = sub.add_parser("simulate", help="simulate a dataset + truth file")
    common(p_sim)
    p_sim.add_argument("--model", type=int, choices=range(1, 9), default=None)

    p_score = sub.add_parser("score", help="score a fit against a truth file")
    p_score.add_argument("--fit", required=True, help="fit output directory")
    p_score.add_argument("--truth", required=True, help="truth CSV")
    p_score.add_argument("--out", default=None, help="report CSV path")

    p_diag = sub.add_parser("diagnose",
                            help="recompute diagnostics from a samples file")
    common(p_diag)
    p_diag.add_argument("--samples", required=True, help="samples .npz file")
    return parser


def _apply_model_override(cfg, model):
    if model is not None:
        cfg = dict(cfg)
        cfg["model.id"] = str(model)
        cfg.pop("model.trend", None)
        cfg.pop("model.effect", None)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "score":
            report = run_recovery_score(args.fit, args.truth, out=args.out)
            for k, v in sorted(report.items()):
                print(f"{k}: {v}")
            return EXIT_OK
        cfg = parse_config(args.config)
        if args.command == "fit":
            cfg = _apply_model_override(cfg, args.model)
            run_fit(cfg, args.out, seed=args.seed, estimator=args.estimator,
                    fmt=args.format)
        elif args.command == "simulate":
            cfg = _apply_model_override(cfg, args.model)
            run_simulate(cfg, args.out, seed=args.seed)
        elif args.command == "diagnose":
            run_diagnose(cfg, args.samples, args.out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SamplerError, KalmanError, ArError, DivergenceError,
            DiagnosticsError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
