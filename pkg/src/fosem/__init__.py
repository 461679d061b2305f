"""Hierarchical Bayesian emulation of slope factor-of-safety deterioration.

The package turns a small ensemble of slope-deterioration computer runs
into a probabilistic emulator: per-run deterioration curves (a single
quadratic or a two-piece quadratic spline) whose parameters are tied to
the run's initial conditions through Gaussian-process regression, fitted
by MCMC, and used to predict FoS trajectories and failure times for new
slope configurations.
"""

from .errors import (FosemError, InvalidParameterError, DataValidationError,
                     NumericalError)
from .curves import (QuadraticParams, BSplineParams, KnotVector, ConstraintReport,
                     eval_quadratic, eval_bspline, quadratic_poly, bspline_pieces,
                     bspline_basis, check_constraints, collapse_to_quadratic)

__version__ = "0.1.0"
