"""Gaussian-process layer linking initial conditions to curve parameters.

Each run's five initial conditions (height, angle, cohesion, friction
angle, permeability) are standardised against the training design and
mapped, through a linear mean and an anisotropic Gaussian correlation
with a small nugget, to a distribution over the log-scale curve
parameters. The hyperprior constants below were elicited so that a
slope with standardised coordinates z = 0 ("average" characteristics)
has an initial FoS centred on 2, a failure time centred near 191 years,
and observation noise centred on 0.1.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .curves import BSplineParams, QuadraticParams
from .errors import DataValidationError, InvalidParameterError, NumericalError

IC_NAMES = ("height", "angle", "cohesion", "friction_angle", "permeability")

# design ranges for the five initial conditions (permeability in m/s)
DEFAULT_IC_RANGES = {
    "height": (4.0, 20.0),
    "angle": (7.6, 63.4),
    "cohesion": (3.0, 10.0),
    "friction_angle": (18.5, 25.0),
    "permeability": (0.145e-8, 2.5e-8),
}

PERMEABILITY_SCALE = 1e8
ANGLE_SD_FACTOR = 1.5

OUTPUTS_BSPLINE = ("A0", "A1", "A2", "Omega", "Sigma")
OUTPUTS_QUAD = ("A0", "A1", "Omega", "Sigma")

# elicited hyperprior: intercept (mean, sd) and slope sd per output
INTERCEPT_PRIORS = {
    "A0": (math.log(1.0), 0.5),
    "A1": (math.log(0.6), 0.4),
    "A2": (-0.5, 2.5),
    "Omega": (5.25, 1.0),
    "Sigma": (math.log(0.1), 0.5),
}
SLOPE_PRIOR_SD = {"A0": 0.5, "A1": 0.5, "A2": 1.0, "Omega": 1.0, "Sigma": 0.5}
TAU_SHAPE = 3.0
TAU_SCALE = 0.5
DELTA_RATE = 0.2
DEFAULT_NUGGET = 1e-6


def model_outputs(model):
    if model == "bspline":
        return OUTPUTS_BSPLINE
    if model == "quadratic":
        return OUTPUTS_QUAD
    raise InvalidParameterError(f"unknown model tag {model!r}")


@dataclass(frozen=True)
class InitialConditions:
    """One run's static simulator inputs (m, degrees, kPa, degrees, m/s)."""

    height: float
    angle: float
    cohesion: float
    friction_angle: float
    permeability: float

    def __post_init__(self):
        for name in IC_NAMES:
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be finite, got {v!r}")

    def as_array(self):
        return np.array([self.height, self.angle, self.cohesion,
                         self.friction_angle, self.permeability])


@dataclass(frozen=True)
class StandardizationStats:
    """Per-IC training mean and standard deviation.

    Permeability is pre-scaled by 1e8 before the statistics are taken,
    and the angle is divided by 1.5 times its training sd so that its
    standardised spread matches the other inputs.
    """

    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        sd = np.asarray(self.sd, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)
        if mean.shape != (5,) or sd.shape != (5,):
            raise InvalidParameterError("stats must hold 5 means and 5 sds")
        if np.any(~np.isfinite(mean)) or np.any(~np.isfinite(sd)) or np.any(sd <= 0):
            raise DataValidationError("standardisation sds must be positive and finite")

    @classmethod
    def from_design(cls, x):
        """Compute stats from a raw (n, 5) training design (sample sd, ddof=1)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != 5 or x.shape[0] < 2:
            raise DataValidationError("need an (n >= 2, 5) design to compute stats")
        xs = x.copy()
        xs[:, 4] *= PERMEABILITY_SCALE
        sd = xs.std(axis=0, ddof=1)
        if np.any(sd <= 0):
            bad = [IC_NAMES[i] for i in np.nonzero(sd <= 0)[0]]
            raise DataValidationError(f"zero training spread in {', '.join(bad)}")
        return cls(xs.mean(axis=0), sd)


def standardize(x, stats: StandardizationStats):
    """Map raw ICs to the emulator's z scale.

    ``x`` is an :class:`InitialConditions`, a length-5 array, or an
    (n, 5) array of raw values; permeability is in m/s.
    """
    if isinstance(x, InitialConditions):
        x = x.as_array()
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x).astype(float).copy()
    if xs.shape[1] != 5:
        raise DataValidationError("expected 5 initial conditions per run")
    xs[:, 4] *= PERMEABILITY_SCALE
    denom = stats.sd.copy()
    denom[1] *= ANGLE_SD_FACTOR
    z = (xs - stats.mean) / denom
    return z[0] if single else z


def regressor(z):
    """Prepend the intercept: h(z) = (1, z1, ..., z5)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        return np.concatenate(([1.0], z))
    return np.hstack([np.ones((z.shape[0], 1)), z])


def correlation(z1, z2, delta, zeta=0.0):
    """Anisotropic Gaussian correlation between two standardised points.

    The nugget ``zeta`` is added only when the two points coincide
    exactly (numerical-stability device, not a noise model).
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise InvalidParameterError("correlation lengths must be positive")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    d = z1 - z2
    c = math.exp(-float(np.sum(d * d / (delta * delta))))
    if np.array_equal(z1, z2):
        c += zeta
    return c


def squared_separations(z):
    """Per-dimension squared differences, shape (n, n, 5).

    Precomputed once per design; the correlation matrix for any delta is
    then ``exp(-(d2 / delta**2).sum(-1))``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    d = z[:, None, :] - z[None, :, :]
    return d * d


def correlation_matrix(z, delta, zeta=0.0, d2=None):
    """Correlation matrix of a standardised design (distinct rows assumed)."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise InvalidParameterError("correlation lengths must be positive")
    if d2 is None:
        d2 = squared_separations(z)
    u = np.exp(-np.sum(d2 / (delta * delta), axis=-1))
    u[np.diag_indices_from(u)] += zeta
    return u


def cross_correlation(z, z_star, delta):
    """Correlations between a design and one new point (no nugget)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    d = z - np.asarray(z_star, dtype=float)
    delta = np.asarray(delta, dtype=float)
    return np.exp(-np.sum(d * d / (delta * delta), axis=-1))


@dataclass
class EmulatorHyper:
    """Regression coefficients and covariance hyperparameters.

    beta has one row of six coefficients (intercept + five slopes) per
    output in ``outputs``; tau are the marginal GP variances, delta the
    five correlation lengths, zeta the fixed nugget.
    """

    outputs: tuple
    beta: np.ndarray
    tau: np.ndarray
    delta: np.ndarray
    zeta: float = DEFAULT_NUGGET

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        L = len(self.outputs)
        if self.beta.shape != (L, 6):
            raise InvalidParameterError(f"beta must be ({L}, 6), got {self.beta.shape}")
        if self.tau.shape != (L,):
            raise InvalidParameterError(f"tau must have {L} entries")
        if self.delta.shape != (5,):
            raise InvalidParameterError("delta must have 5 entries")

    @classmethod
    def prior_centre(cls, model, zeta=DEFAULT_NUGGET):
        """Hyperparameters at the centre of their priors (useful inits)."""
        outputs = model_outputs(model)
        beta = np.zeros((len(outputs), 6))
        for i, name in enumerate(outputs):
            beta[i, 0] = INTERCEPT_PRIORS[name][0]
        tau = np.full(len(outputs), TAU_SCALE / (TAU_SHAPE - 1.0))
        delta = np.full(5, 1.0 / DELTA_RATE)
        return cls(outputs, beta, tau, delta, zeta)

    def output_index(self, name):
        return self.outputs.index(name)


def _norm_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -math.log(sd) - 0.5 * math.log(2.0 * math.pi) - 0.5 * z * z


def _invgamma_logpdf(x, shape, scale):
    if x <= 0:
        return -math.inf
    return (shape * math.log(scale) - gammaln(shape)
            - (shape + 1.0) * math.log(x) - scale / x)


def _exponential_logpdf(x, rate):
    if x < 0:
        return -math.inf
    return math.log(rate) - rate * x


def log_prior_hyper(hyper: EmulatorHyper, model):
    """Joint log density of the elicited hyperprior.

    Returns -inf outside the support (non-positive tau or delta,
    negative nugget, non-finite values).
    """
    outputs = model_outputs(model)
    if tuple(hyper.outputs) != outputs:
        raise InvalidParameterError(
            f"hyperparameters are for outputs {hyper.outputs}, model {model!r} "
            f"needs {outputs}")
    values = np.concatenate([hyper.beta.ravel(), hyper.tau, hyper.delta, [hyper.zeta]])
    if np.any(~np.isfinite(values)):
        return -math.inf
    if np.any(hyper.tau <= 0) or np.any(hyper.delta <= 0) or hyper.zeta < 0:
        return -math.inf
    total = 0.0
    for i, name in enumerate(outputs):
        m, s = INTERCEPT_PRIORS[name]
        total += _norm_logpdf(hyper.beta[i, 0], m, s)
        for j in range(1, 6):
            total += _norm_logpdf(hyper.beta[i, j], 0.0, SLOPE_PRIOR_SD[name])
        total += _invgamma_logpdf(hyper.tau[i], TAU_SHAPE, TAU_SCALE)
    for k in range(5):
        total += _exponential_logpdf(hyper.delta[k], DELTA_RATE)
    return total


def sample_hyper_prior(rng, model="bspline", zeta=DEFAULT_NUGGET):
    """One draw from the hyperprior."""
    outputs = model_outputs(model)
    L = len(outputs)
    beta = np.empty((L, 6))
    for i, name in enumerate(outputs):
        m, s = INTERCEPT_PRIORS[name]
        beta[i, 0] = rng.normal(m, s)
        beta[i, 1:] = rng.normal(0.0, SLOPE_PRIOR_SD[name], size=5)
    tau = TAU_SCALE / rng.gamma(TAU_SHAPE, 1.0, size=L)
    delta = rng.exponential(1.0 / DELTA_RATE, size=5)
    return EmulatorHyper(outputs, beta, tau, delta, zeta)


def _chol(u):
    try:
        return np.linalg.cholesky(u)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "correlation matrix is not positive definite; the design may "
            "contain (near-)duplicate runs - increase the nugget") from exc


def sample_latents_prior(hyper: EmulatorHyper, z, rng):
    """Draw per-run curve parameters from their GP prior.

    Each output l is drawn independently as N(H beta_l, tau_l U) over
    the standardised design ``z``; the draws are returned as one
    parameter set per run. Note the non-increasing-after-knot support
    restriction is applied downstream (in the likelihood and the
    predictive samplers), not here.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[0]
    h = regressor(z)
    u = correlation_matrix(z, hyper.delta, hyper.zeta)
    root = _chol(u)
    latents = np.empty((n, len(hyper.outputs)))
    for i in range(len(hyper.outputs)):
        mean = h @ hyper.beta[i]
        latents[:, i] = mean + math.sqrt(hyper.tau[i]) * (root @ rng.standard_normal(n))
    cls = BSplineParams if len(hyper.outputs) == 5 else QuadraticParams
    return [cls(*latents[i]) for i in range(n)]


@dataclass
class PriorPredictive:
    """Prior draws of deterministic curves and noisy yearly series."""

    grid: np.ndarray
    curves: np.ndarray           # (samples, len(grid)), deterministic g
    series: np.ndarray           # curves + observation noise
    params: list = field(default_factory=list)
    n_boundary: int = 0          # draws where the A2 resampling budget ran out


def prior_predictive(grid, n_samples, rng, model="bspline", hyper=None, z=None,
                     fixed=None, max_tries=100, zeta=DEFAULT_NUGGET):
    """Sample deterioration curves implied by the prior at one IC point.

    For each sample the hyperparameters are drawn from the hyperprior
    (unless ``hyper`` is given), the curve parameters are drawn from
    their GP marginals at ``z`` (default: the average slope, z = 0), and
    the support restriction gamma2 <= gamma1 is imposed by redrawing A2
    alone, up to ``max_tries`` times, before clamping to the boundary.
    ``fixed`` maps output names to values held constant, e.g.
    ``{"A0": 0.0, "Omega": 5.25}`` to study curve shapes only.
    """
    from .curves import eval_bspline, eval_quadratic

    grid = np.asarray(grid, dtype=float)
    outputs = model_outputs(model)
    z = np.zeros(5) if z is None else np.asarray(z, dtype=float)
    h = regressor(z)
    fixed = fixed or {}
    for name in fixed:
        if name not in outputs:
            raise InvalidParameterError(f"cannot fix unknown output {name!r}")

    curves = np.empty((n_samples, grid.size))
    series = np.empty_like(curves)
    params = []
    n_boundary = 0
    for s in range(n_samples):
        hy = hyper if hyper is not None else sample_hyper_prior(rng, model, zeta)
        mean = hy.beta @ h
        sd = np.sqrt(hy.tau * (1.0 + hy.zeta))
        a = mean + sd * rng.standard_normal(len(outputs))
        for name, value in fixed.items():
            a[outputs.index(name)] = value
        if model == "bspline" and "A2" not in fixed:
            i1, i2 = outputs.index("A1"), outputs.index("A2")
            tries = 0
            while a[i2] > a[i1] and tries < max_tries:
                a[i2] = mean[i2] + sd[i2] * rng.standard_normal()
                tries += 1
            if a[i2] > a[i1]:
                a[i2] = a[i1]
                n_boundary += 1
        if model == "bspline":
            p = BSplineParams(*a)
            g = eval_bspline(p, grid)
        else:
            p = QuadraticParams(*a)
            g = eval_quadratic(p, grid)
        params.append(p)
        curves[s] = g
        series[s] = g + p.sigma * rng.standard_normal(grid.size)
    return PriorPredictive(grid, curves, series, params, n_boundary)
