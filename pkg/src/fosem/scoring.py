"""Forecast scoring: mean squared error, CRPS, and model comparison.

The continuous ranked probability score of an ensemble forecast is
computed in its sample form

    crps = mean|X_m - x| - (1 / 2M^2) sum_{m,m'} |X_m - X_m'|

via an O(M log M) sorted rearrangement of the double sum; the closed
Gaussian form is provided as a cross-check oracle. Model comparison
pairs the per-run, per-time scores of the quadratic and two-piece
models and summarises their differences as Tukey boxplots.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DataValidationError


def mse(pred_mean, observed):
    """Per-time squared errors of a mean forecast, plus their mean.

    Grids must already be aligned; a length mismatch is an error.
    """
    pred_mean = np.asarray(pred_mean, dtype=float)
    observed = np.asarray(observed, dtype=float)
    if pred_mean.shape != observed.shape:
        raise DataValidationError(
            f"prediction and observation grids are misaligned: "
            f"{pred_mean.shape} vs {observed.shape}")
    err = (pred_mean - observed) ** 2
    return err, float(err.mean())


def crps_empirical(samples, x):
    """CRPS of an ensemble forecast against one observation.

    Uses the sorted form of the sample estimator, equivalent to the
    integral of the squared difference between the empirical CDF and
    the observation's step function.
    """
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    m = samples.size
    if m == 0:
        raise DataValidationError("cannot score an empty sample set")
    term1 = np.abs(samples - x).mean()
    k = np.arange(1, m + 1)
    term2 = np.sum((2.0 * k - m - 1.0) * samples) / (m * m)
    return float(term1 - term2)


def crps_gaussian(mu, sigma, x):
    """Closed-form CRPS of a N(mu, sigma^2) forecast (test oracle)."""
    if sigma <= 0:
        raise DataValidationError("sigma must be positive")
    z = (x - mu) / sigma
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(sigma * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * phi - 1.0 / math.sqrt(math.pi)))


def boxplot_summary(values):
    """Five-number Tukey summary (1.5 IQR whiskers) of an array."""
    values = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
    return {
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
        "n_outliers": int(values.size - inside.size),
    }


@dataclass
class RunScores:
    """Per-time scores of one model on one run."""

    run_id: int
    years: np.ndarray
    mse: np.ndarray
    crps: np.ndarray


@dataclass
class ModelScores:
    """Per-run score tables of one fitted model."""

    model: str
    runs: dict = field(default_factory=dict)  # run_id -> RunScores

    def add(self, rs: RunScores):
        self.runs[rs.run_id] = rs


@dataclass
class ScoreTable:
    """Paired comparison of two models (first minus second) per run."""

    model_a: str
    model_b: str
    run_ids: list
    years: dict
    mse_a: dict
    mse_b: dict
    crps_a: dict
    crps_b: dict
    mse_diff: dict
    crps_diff: dict
    boxplots: dict  # run_id -> {"mse": summary, "crps": summary}


def score_model(draws, train, rng=None):
    """Score a fitted model against its own training observations.

    CRPS is evaluated on posterior predictive samples (curve plus
    observation noise) at every observed year; MSE compares the
    predictive mean series with the observations.
    """
    from .prediction import _curve_matrix

    rng = rng if rng is not None else np.random.default_rng(0)
    lat_all = draws.latents()
    scores = ModelScores(draws.model)
    for i, s in enumerate(train.series):
        lat = lat_all[:, i, :]
        fos = 1.0 + _curve_matrix(draws.model, lat, s.years)
        sigma = np.exp(lat[:, -1])
        samples = fos + sigma[:, None] * rng.standard_normal(fos.shape)
        per_time, _ = mse(fos.mean(axis=0), s.fos)
        crps = np.array([crps_empirical(samples[:, j], s.fos[j])
                         for j in range(s.years.size)])
        scores.add(RunScores(s.run_id, s.years.copy(), per_time, crps))
    return scores


def compare_models(scores_a: ModelScores, scores_b: ModelScores):
    """Pair two models' score tables run by run and time by time."""
    ids_a = sorted(scores_a.runs)
    ids_b = sorted(scores_b.runs)
    if ids_a != ids_b:
        raise DataValidationError(
            f"model score tables cover different runs: {ids_a} vs {ids_b}")
    years, mse_a, mse_b, crps_a, crps_b = {}, {}, {}, {}, {}
    mse_diff, crps_diff, boxplots = {}, {}, {}
    for rid in ids_a:
        ra, rb = scores_a.runs[rid], scores_b.runs[rid]
        if ra.years.shape != rb.years.shape or np.any(ra.years != rb.years):
            raise DataValidationError(f"run {rid}: score grids are misaligned")
        years[rid] = ra.years
        mse_a[rid], mse_b[rid] = ra.mse, rb.mse
        crps_a[rid], crps_b[rid] = ra.crps, rb.crps
        mse_diff[rid] = ra.mse - rb.mse
        crps_diff[rid] = ra.crps - rb.crps
        boxplots[rid] = {"mse": boxplot_summary(mse_diff[rid]),
                         "crps": boxplot_summary(crps_diff[rid])}
    return ScoreTable(scores_a.model, scores_b.model, ids_a, years,
                      mse_a, mse_b, crps_a, crps_b, mse_diff, crps_diff, boxplots)
