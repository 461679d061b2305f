"""Posterior FoS bands, failure-time distributions, and new-slope prediction.

Within-sample predictions evaluate each posterior draw's curve on a
time grid and add observation noise; out-of-sample predictions first
condition each output's GP on the draw's latent values (closed-form
kriging equations) at the new standardised ICs, then proceed the same
way. Failure times are simulated on a yearly grid: a draw fails at the
first grid point whose noisy value drops to zero, or deterministically
at the first grid point past the draw's curve root.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .data import TrainingData
from .emulator import (EmulatorHyper, correlation_matrix, cross_correlation,
                       regressor, standardize)
from .errors import DataValidationError, NumericalError

_VAR_CLAMP = 1e-12


@dataclass
class PredictionBand:
    """Pointwise posterior mean and central 95% interval of FoS."""

    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    curves: np.ndarray = None     # optional per-draw FoS samples (S, T)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not (self.grid.shape == self.mean.shape == self.lower.shape
                == self.upper.shape):
            raise DataValidationError("band arrays must share one grid")
        if np.any(self.lower > self.mean + 1e-9) or np.any(self.mean > self.upper + 1e-9):
            raise DataValidationError("band ordering violated (lower <= mean <= upper)")

    def coverage(self, years, fos):
        """Fraction of observations falling inside the band (grids must match)."""
        years = np.asarray(years, dtype=float)
        fos = np.asarray(fos, dtype=float)
        idx = np.searchsorted(self.grid, years)
        if np.any(idx >= self.grid.size) or np.any(self.grid[idx] != years):
            raise DataValidationError("observation years missing from the band grid")
        return float(np.mean((fos >= self.lower[idx]) & (fos <= self.upper[idx])))


@dataclass
class TTFDistribution:
    """Samples of predicted failure time rho and of the curve root omega."""

    rho: np.ndarray
    omega: np.ndarray
    step: float
    quantiles: dict = None

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.rho.shape != self.omega.shape:
            raise DataValidationError("rho and omega sample counts differ")
        if np.any(self.rho <= 0):
            raise DataValidationError("failure times must be positive")
        # noise can only bring failure forward of the grid-rounded curve root
        cap = self.step * np.ceil(self.omega / self.step - 1e-12)
        if np.any(self.rho > cap + 1e-9):
            raise DataValidationError("rho exceeds the grid-rounded curve root")
        if self.quantiles is None:
            self.quantiles = {q: float(np.quantile(self.rho, q / 100.0))
                              for q in (2.5, 25.0, 50.0, 75.0, 97.5)}


def _curve_matrix(model, latents, grid):
    """Deterministic curves of many draws on one grid, shape (S, T)."""
    latents = np.atleast_2d(latents)
    s, t = latents.shape[0], np.asarray(grid, dtype=float)
    tt = np.tile(t, s)
    rep = np.repeat(np.arange(s), t.size)
    g0 = np.exp(latents[:, 0])[rep]
    g1 = np.exp(latents[:, 1])[rep]
    if model == "bspline":
        g2 = np.exp(latents[:, 2])[rep]
        om = np.exp(latents[:, 3])[rep]
        vals = kernels.bspline_curve(tt, g0, g1, g2, om)
    else:
        om = np.exp(latents[:, 2])[rep]
        vals = kernels.quad_curve(tt, g0, g1, om)
    return vals.reshape(s, t.size)


def _band_from_latents(model, latents, grid, rng, include_noise, keep_curves):
    grid = np.asarray(grid, dtype=float)
    g = _curve_matrix(model, latents, grid)
    fos = 1.0 + g
    mean = fos.mean(axis=0)
    if include_noise:
        sigma = np.exp(latents[:, -1])
        samples = fos + sigma[:, None] * rng.standard_normal(fos.shape)
    else:
        samples = fos
    lower, upper = np.quantile(samples, [0.025, 0.975], axis=0)
    return PredictionBand(grid, mean, lower, upper,
                          curves=samples if keep_curves else None)


def _ttf_from_latents(model, latents, step, rng, block=4096):
    latents = np.atleast_2d(latents)
    i_om = 3 if model == "bspline" else 2
    omega = np.exp(latents[:, i_om])
    sigma = np.exp(latents[:, -1])
    rho = np.empty(latents.shape[0])
    for s in range(latents.shape[0]):
        n_steps = int(math.ceil(omega[s] / step - 1e-12))
        start = 1
        found = None
        while found is None:
            stop = min(start + block - 1, n_steps)
            tgrid = step * np.arange(start, stop + 1)
            g = _curve_matrix(model, latents[s:s + 1], tgrid)[0]
            y = g + sigma[s] * rng.standard_normal(tgrid.size)
            hits = np.nonzero((y <= 0.0) | (g <= 0.0))[0]
            if hits.size:
                found = tgrid[hits[0]]
            elif stop >= n_steps:
                found = step * n_steps  # curve root itself (g = 0 there)
            start = stop + 1
        rho[s] = found
    return TTFDistribution(rho=rho, omega=omega, step=step)


def _run_latents(draws, run_id):
    if run_id not in draws.run_ids:
        raise DataValidationError(f"unknown run id {run_id}")
    return draws.latents()[:, draws.run_ids.index(run_id), :]


def posterior_fos(draws, run_id, grid, rng=None, include_noise=True,
                  keep_curves=False):
    """Posterior FoS band of a fitted run on an arbitrary year grid.

    Each posterior draw contributes 1 + g(t) plus one noise realisation
    per grid point; the band is the pointwise mean (of the noise-free
    curves) and the central 95% interval of the noisy samples.
    Extrapolation beyond the data range is allowed.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    return _band_from_latents(draws.model, _run_latents(draws, run_id), grid,
                              rng, include_noise, keep_curves)


def predicted_ttf(draws, run_id, step=1.0, rng=None):
    """Distribution of the first year the noisy FoS reaches failure.

    Noise is drawn independently at each grid point of each draw; a draw
    that never crosses by its curve root omega fails there (g is zero
    from omega on), so every sample is bounded by omega rounded up to
    the grid.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if step <= 0:
        raise DataValidationError("grid step must be positive")
    return _ttf_from_latents(draws.model, _run_latents(draws, run_id), step, rng)


def _check_distinct_rows(z):
    z = np.atleast_2d(z)
    for i in range(z.shape[0]):
        for j in range(i + 1, z.shape[0]):
            if np.array_equal(z[i], z[j]):
                raise DataValidationError(
                    f"training design rows {i} and {j} coincide; conditioning "
                    "requires distinct inputs")


def condition_latent(y, z, hyper: EmulatorHyper, output, z_star):
    """Closed-form GP conditioning of one output at a new point.

    Given "observed" latent values ``y`` at the standardised training
    design ``z``, returns the conditional mean and variance at
    ``z_star`` under that output's coefficients and scale. The nugget
    enters the training covariance diagonal and the prior variance at
    the new point, never the cross-correlations.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.shape != (z.shape[0],):
        raise DataValidationError("one latent value per training run required")
    _check_distinct_rows(z)
    i = hyper.output_index(output)
    beta, tau = hyper.beta[i], hyper.tau[i]
    sig = correlation_matrix(z, hyper.delta, hyper.zeta)
    try:
        cho = cho_factor(sig, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "training covariance is singular; increase the nugget") from exc
    t_vec = cross_correlation(z, z_star, hyper.delta)
    h_star = regressor(np.asarray(z_star, dtype=float))
    resid = y - regressor(z) @ beta
    mean = float(h_star @ beta + t_vec @ cho_solve(cho, resid))
    c_var = 1.0 + hyper.zeta - float(t_vec @ cho_solve(cho, t_vec))
    if c_var < -_VAR_CLAMP:
        raise NumericalError(
            f"conditional variance {c_var:.3e} is negative beyond round-off; "
            "increase the nugget")
    return mean, float(tau * max(c_var, 0.0))


@dataclass
class OutOfSamplePrediction:
    """Band plus failure-time distribution at a new IC point."""

    band: PredictionBand
    ttf: TTFDistribution
    latents: np.ndarray
    n_skipped: int = 0


def predict_out_of_sample(draws, train: TrainingData, x_star, grid, rng=None,
                          step=1.0, max_resample=100, keep_curves=False):
    """Fully Bayesian prediction at initial conditions not in the fit.

    For every posterior draw the draw's latent vectors act as the
    conditioning observations: each output is conditioned at the
    standardised new point and a latent value is sampled from the
    resulting normal. Draws violating the shape restriction resample A2
    alone up to ``max_resample`` times and are skipped (with a count)
    if the budget runs out.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if train.n_runs == 0:
        raise DataValidationError("cannot condition on an empty training set")
    z_star = standardize(x_star, train.stats)
    h_star = regressor(z_star)
    hz = train.h
    lat_all = draws.latents()
    beta_all, tau_all, delta_all = draws.hyper_arrays()
    zeta = float(draws.meta.get("nugget", 0.0))
    outputs = draws.outputs
    L = len(outputs)
    i_a1 = outputs.index("A1")
    i_a2 = outputs.index("A2") if "A2" in outputs else None
    _check_distinct_rows(train.z)

    kept = []
    n_skipped = 0
    n_draws = lat_all.shape[0]
    for s in range(n_draws):
        delta = delta_all[s]
        sig = correlation_matrix(train.z, delta, zeta, d2=train.d2)
        try:
            cho = cho_factor(sig, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "training covariance is singular for a posterior draw; "
                "increase the nugget") from exc
        t_vec = cross_correlation(train.z, z_star, delta)
        w = cho_solve(cho, t_vec)
        c_var = 1.0 + zeta - float(t_vec @ w)
        if c_var < -_VAR_CLAMP:
            raise NumericalError("conditional variance is negative beyond round-off")
        c_var = max(c_var, 0.0)
        a_star = np.empty(L)
        means = np.empty(L)
        sds = np.empty(L)
        for i in range(L):
            resid = lat_all[s, :, i] - hz @ beta_all[s, i]
            means[i] = float(h_star @ beta_all[s, i] + w @ resid)
            sds[i] = math.sqrt(tau_all[s, i] * c_var)
            a_star[i] = means[i] + sds[i] * rng.standard_normal()
        if i_a2 is not None and a_star[i_a2] > a_star[i_a1]:
            ok = False
            for _ in range(max_resample):
                a_star[i_a2] = means[i_a2] + sds[i_a2] * rng.standard_normal()
                if a_star[i_a2] <= a_star[i_a1]:
                    ok = True
                    break
            if not ok:
                n_skipped += 1
                continue
        kept.append(a_star)
    if not kept:
        raise NumericalError("every posterior draw violated the shape restriction")
    if n_skipped:
        import warnings
        warnings.warn(f"skipped {n_skipped} of {n_draws} draws that could not "
                      "satisfy the shape restriction", RuntimeWarning)
    latents = np.array(kept)
    band = _band_from_latents(draws.model, latents, grid, rng, True, keep_curves)
    ttf = _ttf_from_latents(draws.model, latents, step, rng)
    return OutOfSamplePrediction(band=band, ttf=ttf, latents=latents,
                                 n_skipped=n_skipped)
