"""Run-level data containers shared by the simulator, fitting, and prediction."""

from dataclasses import dataclass, field

import numpy as np

from .emulator import StandardizationStats, regressor, squared_separations, standardize
from .errors import DataValidationError

MIN_OBSERVATIONS = 4


@dataclass
class FoSSeries:
    """Yearly factor-of-safety record of one computer run.

    ``fos`` holds the raw FoS values; the model works with the shifted
    observations y = FoS - 1 so that failure corresponds to y <= 0.
    Runs that never fail within the simulation horizon carry
    ``censored=True``.
    """

    run_id: int
    years: np.ndarray
    fos: np.ndarray
    censored: bool = False

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=float)
        self.fos = np.asarray(self.fos, dtype=float)
        if self.years.shape != self.fos.shape or self.years.ndim != 1:
            raise DataValidationError(f"run {self.run_id}: years/fos shape mismatch")
        if np.any(~np.isfinite(self.years)) or np.any(~np.isfinite(self.fos)):
            raise DataValidationError(f"run {self.run_id}: non-finite data")
        if np.any(np.diff(self.years) <= 0):
            raise DataValidationError(f"run {self.run_id}: years must increase")

    @property
    def y(self):
        """Shifted observations, FoS - 1."""
        return self.fos - 1.0

    def __len__(self):
        return self.years.size


@dataclass
class TrainingData:
    """Validated, standardised bundle of series plus their design rows.

    Exposes the flattened observation arrays and design precomputations
    the samplers need. Standardisation statistics are computed from the
    design rows of exactly the runs being fitted (the training design)
    unless explicitly supplied.
    """

    series: list
    design: np.ndarray              # (n, 5) raw ICs aligned with series
    stats: StandardizationStats = None
    z: np.ndarray = field(init=False, default=None)
    h: np.ndarray = field(init=False, default=None)
    d2: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float).reshape(-1, 5) \
            if np.size(self.design) else np.empty((0, 5))
        problems = []
        seen = set()
        for s in self.series:
            if s.run_id in seen:
                problems.append(f"duplicate run id {s.run_id}")
            seen.add(s.run_id)
            if len(s) < MIN_OBSERVATIONS:
                problems.append(
                    f"run {s.run_id} has {len(s)} observations "
                    f"(minimum {MIN_OBSERVATIONS})")
        if len(self.series) != self.design.shape[0]:
            problems.append(
                f"{len(self.series)} series but {self.design.shape[0]} design rows")
        if problems:
            raise DataValidationError("; ".join(problems))
        if self.n_runs:
            if self.stats is None:
                self.stats = StandardizationStats.from_design(self.design)
            self.z = standardize(self.design, self.stats)
            self.h = regressor(self.z)
            self.d2 = squared_separations(self.z)
        else:
            self.z = np.empty((0, 5))
            self.h = np.empty((0, 6))
            self.d2 = np.empty((0, 0, 5))
        self.run_ids = [s.run_id for s in self.series]
        self.t_flat = np.concatenate([s.years for s in self.series]) \
            if self.n_runs else np.empty(0)
        self.y_flat = np.concatenate([s.y for s in self.series]) \
            if self.n_runs else np.empty(0)
        self.run_index = np.concatenate(
            [np.full(len(s), i, dtype=np.int64) for i, s in enumerate(self.series)]) \
            if self.n_runs else np.empty(0, dtype=np.int64)

    @property
    def n_runs(self):
        return len(self.series)

    @property
    def n_obs(self):
        return int(self.t_flat.size)

    def index_of(self, run_id):
        try:
            return self.run_ids.index(run_id)
        except ValueError:
            raise DataValidationError(f"unknown run id {run_id}") from None

    @classmethod
    def empty(cls):
        """A dataset with no runs; fitting it samples the hyperprior."""
        return cls(series=[], design=np.empty((0, 5)))

    @classmethod
    def from_series(cls, series, design_map, stats=None):
        """Align a series list with a {run_id: raw-IC-row} design mapping."""
        missing = [s.run_id for s in series if s.run_id not in design_map]
        if missing:
            raise DataValidationError(
                f"no design row for run ids {sorted(missing)}")
        design = np.array([np.asarray(design_map[s.run_id], dtype=float)
                           for s in series]).reshape(-1, 5)
        return cls(series=list(series), design=design, stats=stats)
