"""Deterioration-curve models for shifted factor of safety, Y = FoS - 1.

Two deterministic curve families share the same structure: a single
quadratic that starts at gamma0 and reaches zero at the model
time-to-failure omega, and a two-piece quadratic (a B-spline with one
interior knot at omega/2) whose extra coefficient gamma2 lets the
deterioration rate change regime halfway to failure. Both are zero for
t >= omega. Parameters are stored on the unconstrained log scale
(A0, A1, A2, Omega, Sigma) so that the positive quantities
gamma = exp(A) are positive by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from . import kernels


def _check_finite(name, value):
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


def _exp(x):
    # math.exp raises on overflow; saturate to inf so constraint checks can report it
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class QuadraticParams:
    """Log-scale parameters of the single-quadratic curve.

    A0
        log of the initial shifted FoS, gamma0 = exp(A0).
    A1
        log of the shape coefficient gamma1 = exp(A1); gamma1 > 0
        guarantees omega is the first positive root of the curve.
    Omega
        log of the model time to failure, omega = exp(Omega) years.
    Sigma
        log of the observation noise standard deviation.
    """

    A0: float
    A1: float
    Omega: float
    Sigma: float

    def __post_init__(self):
        for name in ("A0", "A1", "Omega", "Sigma"):
            _check_finite(name, getattr(self, name))

    @property
    def gamma0(self):
        return _exp(self.A0)

    @property
    def gamma1(self):
        return _exp(self.A1)

    @property
    def omega(self):
        return _exp(self.Omega)

    @property
    def sigma(self):
        return _exp(self.Sigma)

    @classmethod
    def from_constrained(cls, gamma0, gamma1, omega, sigma):
        return cls(math.log(gamma0), math.log(gamma1), math.log(omega), math.log(sigma))


@dataclass(frozen=True)
class BSplineParams:
    """Log-scale parameters of the two-piece curve.

    Adds A2 (log of the second-piece coefficient gamma2) to the
    quadratic parameter set. The interior knot sits at omega/2 and the
    curve is forced to cross zero at omega. The plausibility constraint
    gamma2 <= gamma1 (non-increasing after the knot) is *not* enforced
    here; see :func:`check_constraints`.
    """

    A0: float
    A1: float
    A2: float
    Omega: float
    Sigma: float

    def __post_init__(self):
        for name in ("A0", "A1", "A2", "Omega", "Sigma"):
            _check_finite(name, getattr(self, name))

    @property
    def gamma0(self):
        return _exp(self.A0)

    @property
    def gamma1(self):
        return _exp(self.A1)

    @property
    def gamma2(self):
        return _exp(self.A2)

    @property
    def omega(self):
        return _exp(self.Omega)

    @property
    def sigma(self):
        return _exp(self.Sigma)

    @property
    def knot(self):
        """Interior knot location, half the model time to failure."""
        return 0.5 * self.omega

    @classmethod
    def from_constrained(cls, gamma0, gamma1, gamma2, omega, sigma):
        return cls(math.log(gamma0), math.log(gamma1), math.log(gamma2),
                   math.log(omega), math.log(sigma))


@dataclass(frozen=True)
class KnotVector:
    """Augmented knot sequence for a quadratic B-spline on [0, omega].

    The boundary knots 0 and omega are each repeated ``order`` times
    around ``m`` interior knots, giving ``m + 2 * order`` entries.
    """

    knots: np.ndarray
    order: int = 3

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", k)
        o = self.order
        if k.ndim != 1 or k.size < 2 * o:
            raise InvalidParameterError("knot vector too short for the spline order")
        if np.any(np.diff(k) < 0):
            raise InvalidParameterError("knots must be nondecreasing")
        if np.any(k[:o] != 0.0):
            raise InvalidParameterError(f"first {o} knots must equal 0")
        if np.any(k[-o:] != k[-1]):
            raise InvalidParameterError(f"last {o} knots must coincide")

    @property
    def m(self):
        """Number of interior knots."""
        return self.knots.size - 2 * self.order

    @property
    def omega(self):
        return float(self.knots[-1])

    @classmethod
    def for_curve(cls, omega, interior=1, order=3):
        """Knots (0,...,0, omega/2, omega,...,omega) or the no-interior variant."""
        if not (omega > 0 and math.isfinite(omega)):
            raise InvalidParameterError(f"omega must be positive and finite, got {omega!r}")
        if interior == 0:
            inner = []
        elif interior == 1:
            inner = [0.5 * omega]
        else:
            raise InvalidParameterError("only 0 or 1 interior knots are supported")
        return cls(np.array([0.0] * order + inner + [omega] * order), order)


def _as_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidParameterError("times must be finite and non-negative")
    return t


def eval_quadratic(p: QuadraticParams, t):
    """Deterministic quadratic curve g(t), zero for t >= omega.

    ``t`` may be a scalar or array of non-negative years.
    """
    if not all(map(math.isfinite, (p.gamma0, p.gamma1, p.omega))):
        raise InvalidParameterError("constrained parameters overflowed")
    ta = _as_times(t)
    flat = np.atleast_1d(ta).ravel()
    n = flat.size
    out = kernels.quad_curve(flat, np.full(n, p.gamma0), np.full(n, p.gamma1),
                             np.full(n, p.omega))
    return float(out[0]) if np.isscalar(t) else out.reshape(np.shape(t))


def eval_bspline(p: BSplineParams, t):
    """Deterministic two-piece curve g(t), zero for t >= omega."""
    if not all(map(math.isfinite, (p.gamma0, p.gamma1, p.gamma2, p.omega))):
        raise InvalidParameterError("constrained parameters overflowed")
    ta = _as_times(t)
    flat = np.atleast_1d(ta).ravel()
    n = flat.size
    out = kernels.bspline_curve(flat, np.full(n, p.gamma0), np.full(n, p.gamma1),
                                np.full(n, p.gamma2), np.full(n, p.omega))
    return float(out[0]) if np.isscalar(t) else out.reshape(np.shape(t))


def quadratic_poly(p: QuadraticParams, t):
    """Polynomial part of the quadratic curve without the support indicator."""
    t = np.asarray(t, dtype=float)
    g0, g1, w = p.gamma0, p.gamma1, p.omega
    return g0 + t * (2.0 * g1 - 2.0 * g0) / w + t * t * (g0 - 2.0 * g1) / (w * w)


def bspline_pieces(p: BSplineParams, t):
    """Both polynomial pieces of the two-piece curve, without indicators.

    Returns ``(first, second)`` evaluated everywhere; the curve proper
    uses the first on [0, omega/2) and the second on [omega/2, omega).
    """
    t = np.asarray(t, dtype=float)
    g0, g1, g2, w = p.gamma0, p.gamma1, p.gamma2, p.omega
    first = (g0 + t * (4.0 * g1 - 4.0 * g0) / w
             + t * t * (4.0 * g0 - 6.0 * g1 + 2.0 * g2) / (w * w))
    second = (2.0 * (g1 - g2) + t * (8.0 * g2 - 4.0 * g1) / w
              + t * t * (2.0 * g1 - 6.0 * g2) / (w * w))
    return first, second


def bspline_basis(kv: KnotVector, l, j, t):
    """Basis function phi_{l,j}(t) by the De Boor recursion.

    Degree-0 functions are half-open indicators on [k_l, k_{l+1}); the
    recursion weight alpha is defined as 0 whenever its denominator
    k_{l+j} - k_l vanishes. ``t`` may be scalar or array.
    """
    o = kv.order
    if not 0 <= j <= o - 1:
        raise InvalidParameterError(f"degree j must lie in [0, {o - 1}], got {j}")
    n_funcs = kv.knots.size - 1 - j
    if not 0 <= l < n_funcs:
        raise InvalidParameterError(f"index l={l} out of range for degree {j}")
    k = kv.knots
    t = np.asarray(t, dtype=float)

    def alpha(i, jj):
        den = k[i + jj] - k[i]
        if den == 0.0:
            return np.zeros_like(t)
        return (t - k[i]) / den

    def phi(i, jj):
        if jj == 0:
            return np.where((k[i] <= t) & (t < k[i + 1]), 1.0, 0.0)
        return alpha(i, jj) * phi(i, jj - 1) + (1.0 - alpha(i + 1, jj)) * phi(i + 1, jj - 1)

    out = phi(l, j)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConstraintReport:
    ok: bool
    violations: tuple

    def __bool__(self):
        return self.ok


def check_constraints(p):
    """Validate the positivity and shape constraints of a parameter set.

    The quadratic model is constrained by construction (all exponentials
    positive); the two-piece model additionally requires
    gamma2 <= gamma1, the algebraic form of "non-increasing after the
    interior knot": the second piece's derivative is linear in t, equal
    to 2(gamma2 - gamma1)/omega at the knot and -4*gamma2/omega at
    omega, so both endpoints are non-positive exactly when
    gamma2 <= gamma1.
    """
    problems = []
    names = ("gamma0", "gamma1", "gamma2", "omega", "sigma") if isinstance(p, BSplineParams) \
        else ("gamma0", "gamma1", "omega", "sigma")
    for name in names:
        v = getattr(p, name)
        if not math.isfinite(v) or v <= 0.0:
            problems.append(f"{name} = {v!r} is not strictly positive and finite")
    if isinstance(p, BSplineParams) and p.A2 > p.A1:
        problems.append(
            f"gamma2 = {p.gamma2:.6g} exceeds gamma1 = {p.gamma1:.6g}; "
            "curve would increase after the interior knot")
    return ConstraintReport(ok=not problems, violations=tuple(problems))


def collapse_to_quadratic(p: BSplineParams, rtol=1e-9):
    """Reduce a two-piece curve to its quadratic equivalent when one exists.

    The two families coincide exactly when gamma2 = gamma1 - gamma0/2,
    in which case both pieces equal the quadratic with shape coefficient
    2*gamma1 - gamma0. Returns the equivalent :class:`QuadraticParams`,
    or ``None`` if the coefficients do not satisfy the identity to
    relative tolerance ``rtol``.
    """
    target = p.gamma1 - 0.5 * p.gamma0
    if target <= 0.0:
        return None
    if abs(p.gamma2 - target) > rtol * max(abs(p.gamma2), abs(target)):
        return None
    return QuadraticParams(p.A0, math.log(2.0 * p.gamma1 - p.gamma0), p.Omega, p.Sigma)
