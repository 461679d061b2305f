"""Space-filling designs and synthetic deterioration data.

The real training ensemble came from a geotechnical simulator that is
far outside this package's scope, so tests and examples run on
synthetic data: a maximin Latin hypercube over the standard IC ranges,
pushed through a documented smooth map from standardised ICs to true
curve parameters (steeper and taller slopes fail sooner), with yearly
Gaussian noise and censoring at the simulation horizon.
"""

from dataclasses import dataclass, field

import numpy as np

from .curves import BSplineParams, QuadraticParams, eval_bspline, eval_quadratic
from .data import MIN_OBSERVATIONS, FoSSeries
from .emulator import (DEFAULT_IC_RANGES, IC_NAMES, StandardizationStats,
                       model_outputs, standardize)
from .errors import DataValidationError, InvalidParameterError

DEFAULT_HORIZON = 184.0


@dataclass
class Design:
    """A set of IC vectors with run ids, the seed, and the ranges used."""

    ics: np.ndarray          # (n, 5) raw values, IC_NAMES order
    run_ids: np.ndarray
    seed: int
    ranges: dict

    def __post_init__(self):
        self.ics = np.asarray(self.ics, dtype=float)
        self.run_ids = np.asarray(self.run_ids, dtype=int)

    @property
    def n(self):
        return self.ics.shape[0]

    def row_map(self):
        """{run_id: raw IC row} for :meth:`TrainingData.from_series`."""
        return {int(rid): self.ics[i] for i, rid in enumerate(self.run_ids)}


def _ranges_array(ranges):
    lo = np.array([ranges[name][0] for name in IC_NAMES], dtype=float)
    hi = np.array([ranges[name][1] for name in IC_NAMES], dtype=float)
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(hi <= lo):
        raise InvalidParameterError("each IC range needs finite lo < hi")
    return lo, hi


def lhs_design(n, ranges=None, seed=0, candidates=50):
    """Maximin-augmented Latin hypercube over the IC ranges.

    Each dimension is split into ``n`` equal-width bins with exactly one
    point per bin, placed uniformly within its cell; of ``candidates``
    such seeded hypercubes the one maximising the minimum pairwise
    distance (in unit-cube coordinates) is kept.
    """
    if n < 1:
        raise InvalidParameterError("need at least one design point")
    ranges = dict(DEFAULT_IC_RANGES) if ranges is None else dict(ranges)
    lo, hi = _ranges_array(ranges)
    rng = np.random.default_rng(seed)
    best, best_score = None, -np.inf
    for _ in range(max(1, candidates)):
        unit = np.empty((n, 5))
        for k in range(5):
            unit[:, k] = (rng.permutation(n) + rng.random(n)) / n
        if n == 1:
            score = np.inf
        else:
            d = unit[:, None, :] - unit[None, :, :]
            dist2 = np.sum(d * d, axis=-1)
            dist2[np.diag_indices(n)] = np.inf
            score = float(np.min(dist2))
        if score > best_score:
            best, best_score = unit, score
    return Design(ics=lo + best * (hi - lo), run_ids=np.arange(1, n + 1),
                  seed=seed, ranges=ranges)


@dataclass
class TruthGenerator:
    """Smooth map from standardised ICs to true curve parameters.

    Each log-scale parameter is an affine function of z (coefficient
    rows ordered as the model outputs, columns as intercept followed by
    the five IC slopes) plus independent Gaussian jitter. Signs are
    chosen so that taller, steeper, more permeable slopes fail sooner
    and stronger soils fail later. The two-piece shape constraint is
    enforced by clamping A2 at A1.
    """

    model: str = "bspline"
    coef: np.ndarray = None
    jitter_sd: float = 0.3

    def __post_init__(self):
        if self.coef is None:
            self.coef = self.default_coefficients(self.model)
        self.coef = np.asarray(self.coef, dtype=float)
        L = len(model_outputs(self.model))
        if self.coef.shape != (L, 6):
            raise InvalidParameterError(f"coef must be ({L}, 6)")

    @staticmethod
    def default_coefficients(model):
        rows = {
            "A0": [0.0, -0.15, -0.20, 0.15, 0.10, -0.05],
            "A1": [np.log(0.6), -0.10, -0.15, 0.10, 0.05, -0.05],
            "A2": [-1.1, -0.15, -0.20, 0.10, 0.05, -0.10],
            "Omega": [4.4, -0.45, -0.55, 0.20, 0.15, -0.15],
            "Sigma": [np.log(0.06), 0.05, 0.05, 0.0, 0.0, 0.0],
        }
        return np.array([rows[name] for name in model_outputs(model)])

    def params_for(self, z, rng=None):
        """True parameters at one standardised IC point."""
        h = np.concatenate(([1.0], np.asarray(z, dtype=float)))
        a = self.coef @ h
        if rng is not None and self.jitter_sd > 0:
            a = a + self.jitter_sd * rng.standard_normal(a.size)
        if self.model == "bspline":
            a[2] = min(a[2], a[1])
            return BSplineParams(*a)
        return QuadraticParams(*a)

    def describe(self):
        return {"model": self.model, "jitter_sd": self.jitter_sd,
                "coef": self.coef.tolist(),
                "outputs": list(model_outputs(self.model))}


@dataclass
class SyntheticTruth:
    """Ground truth behind a synthetic dataset (test oracle)."""

    model: str
    seed: int
    horizon: float
    generator: dict
    params: dict = field(default_factory=dict)       # run_id -> curve params
    rho_true: dict = field(default_factory=dict)     # run_id -> failure year or None
    censored: dict = field(default_factory=dict)
    dropped_run_ids: list = field(default_factory=list)


def synth_generate(design: Design, truth: TruthGenerator = None,
                   horizon=DEFAULT_HORIZON, seed=0):
    """Generate yearly noisy series for every design point.

    Observations run from year 1 while the (noisy) shifted FoS stays
    positive; the first year it drops to or below zero is the true
    failure year and is excluded from the series. Runs still stable at
    the horizon are censored there. Runs failing so early that fewer
    than ``MIN_OBSERVATIONS`` points remain are dropped and recorded on
    the returned truth object.
    """
    if horizon < 1:
        raise DataValidationError("horizon must cover at least one year")
    truth = truth if truth is not None else TruthGenerator()
    stats = StandardizationStats.from_design(design.ics)
    rng = np.random.default_rng(seed)
    record = SyntheticTruth(model=truth.model, seed=seed, horizon=float(horizon),
                            generator=truth.describe())
    evaluate = eval_bspline if truth.model == "bspline" else eval_quadratic
    years_all = np.arange(1.0, np.floor(horizon) + 1.0)
    series = []
    for i, rid in enumerate(design.run_ids):
        rid = int(rid)
        z = standardize(design.ics[i], stats)
        p = truth.params_for(z, rng)
        g = evaluate(p, years_all)
        noise = p.sigma * rng.standard_normal(years_all.size)
        y = g + noise
        # the deterministic root is a failure even if noise is positive there
        failed = np.nonzero((y <= 0.0) | (g <= 0.0))[0]
        if failed.size:
            stop = failed[0]
            rho = float(years_all[stop])
            censored = False
        else:
            stop = years_all.size
            rho = None
            censored = True
        record.params[rid] = p
        record.rho_true[rid] = rho
        record.censored[rid] = censored
        if stop < MIN_OBSERVATIONS:
            record.dropped_run_ids.append(rid)
            continue
        series.append(FoSSeries(run_id=rid, years=years_all[:stop].copy(),
                                fos=1.0 + y[:stop], censored=censored))
    return series, record
