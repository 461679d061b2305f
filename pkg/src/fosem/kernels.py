"""Hot numeric kernels, JIT-compiled with a pure-numpy fallback.

The Gaussian log likelihood of both deterioration-curve models is a sum
over every observation of every run and sits inside the sampler inner
loop, so it is evaluated O(10^5) times per fit. Each kernel therefore
exists in two forms:

* an explicit-loop version compiled with ``numba.njit`` (default), and
* a vectorised pure-numpy version.

Set ``FOSEM_NUMBA=0`` in the environment to select the numpy path (for
example on platforms where numba is unavailable or while debugging).
Both variants are always importable under ``*_numpy`` / ``*_numba``
names so they can be compared directly; ``benchmarks/bench_kernels.py``
times them against each other.

Gradients are returned with respect to the unconstrained (log-scale)
parameters, i.e. already chained through gamma = exp(A).
"""

import os

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))

_flag = os.environ.get("FOSEM_NUMBA", "1").strip().lower()
NUMBA_ENABLED = _flag not in ("0", "false", "no", "off")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# curve values (element-wise over pre-gathered parameter arrays)
# ---------------------------------------------------------------------------

def quad_curve_numpy(t, g0, g1, om):
    """Deterministic quadratic curve, zero outside [0, omega).

    All arguments are equal-length 1-D arrays (parameters already
    gathered per evaluation point).
    """
    s = t / om
    val = g0 * (1.0 - 2.0 * s + s * s) + g1 * (2.0 * s - 2.0 * s * s)
    return np.where(t < om, val, 0.0)


def bspline_curve_numpy(t, g0, g1, g2, om):
    """Two-piece quadratic curve, zero outside [0, omega)."""
    s = t / om
    s2 = s * s
    p1 = g0 * (1.0 - 4.0 * s + 4.0 * s2) + g1 * (4.0 * s - 6.0 * s2) + g2 * (2.0 * s2)
    p2 = (g1 * (2.0 - 4.0 * s + 2.0 * s2) + g2 * (-2.0 + 8.0 * s - 6.0 * s2))
    return np.where(t < 0.5 * om, p1, np.where(t < om, p2, 0.0))


def _quad_curve_loop(t, g0, g1, om):
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        if t[i] < om[i]:
            s = t[i] / om[i]
            out[i] = g0[i] * (1.0 - 2.0 * s + s * s) + g1[i] * (2.0 * s - 2.0 * s * s)
        else:
            out[i] = 0.0
    return out


def _bspline_curve_loop(t, g0, g1, g2, om):
    n = t.shape[0]
    out = np.empty(n)
    for i in range(n):
        w = om[i]
        if t[i] < 0.5 * w:
            s = t[i] / w
            out[i] = (g0[i] * (1.0 - 4.0 * s + 4.0 * s * s)
                      + g1[i] * (4.0 * s - 6.0 * s * s)
                      + g2[i] * (2.0 * s * s))
        elif t[i] < w:
            s = t[i] / w
            out[i] = (g1[i] * (2.0 - 4.0 * s + 2.0 * s * s)
                      + g2[i] * (-2.0 + 8.0 * s - 6.0 * s * s))
        else:
            out[i] = 0.0
    return out


# ---------------------------------------------------------------------------
# log likelihood + gradient, accumulated per run
# ---------------------------------------------------------------------------

def quad_loglik_numpy(t, y, run, g0, g1, om, sig, lsig, n_runs):
    """Gaussian log likelihood of the quadratic model and its gradient.

    Parameters
    ----------
    t, y, run : 1-D arrays over all observations (times, shifted FoS,
        run index into the per-run parameter arrays).
    g0, g1, om, sig, lsig : per-run constrained parameters
        (gamma0, gamma1, omega, sigma, log sigma).
    n_runs : int

    Returns
    -------
    ll : float
    grad : (n_runs, 4) array, d ll / d (A0, A1, Omega, Sigma).
    """
    G0, G1, OM = g0[run], g1[run], om[run]
    S, LS = sig[run], lsig[run]
    inside = t < OM
    s = t / OM
    s2 = s * s
    g = np.where(inside, G0 * (1.0 - 2.0 * s + s2) + G1 * (2.0 * s - 2.0 * s2), 0.0)
    r = y - g
    isig2 = 1.0 / (S * S)
    ll = float(np.sum(-0.5 * _LOG_2PI - LS - 0.5 * r * r * isig2))

    rw = r * isig2
    dg0 = np.where(inside, 1.0 - 2.0 * s + s2, 0.0)
    dg1 = np.where(inside, 2.0 * s - 2.0 * s2, 0.0)
    dom = np.where(inside, (-(2.0 * G1 - 2.0 * G0) * s - 2.0 * (G0 - 2.0 * G1) * s2) / OM, 0.0)
    grad = np.empty((n_runs, 4))
    grad[:, 0] = np.bincount(run, weights=rw * dg0, minlength=n_runs) * g0
    grad[:, 1] = np.bincount(run, weights=rw * dg1, minlength=n_runs) * g1
    grad[:, 2] = np.bincount(run, weights=rw * dom, minlength=n_runs) * om
    grad[:, 3] = np.bincount(run, weights=r * rw - 1.0, minlength=n_runs)
    return ll, grad


def bspline_loglik_numpy(t, y, run, g0, g1, g2, om, sig, lsig, n_runs):
    """Gaussian log likelihood of the two-piece model and its gradient.

    Same conventions as :func:`quad_loglik_numpy`; the gradient has
    columns (A0, A1, A2, Omega, Sigma).
    """
    G0, G1, G2, OM = g0[run], g1[run], g2[run], om[run]
    S, LS = sig[run], lsig[run]
    s = t / OM
    s2 = s * s
    m1 = t < 0.5 * OM
    m2 = (~m1) & (t < OM)
    p1 = G0 * (1.0 - 4.0 * s + 4.0 * s2) + G1 * (4.0 * s - 6.0 * s2) + G2 * (2.0 * s2)
    p2 = G1 * (2.0 - 4.0 * s + 2.0 * s2) + G2 * (-2.0 + 8.0 * s - 6.0 * s2)
    g = np.where(m1, p1, np.where(m2, p2, 0.0))
    r = y - g
    isig2 = 1.0 / (S * S)
    ll = float(np.sum(-0.5 * _LOG_2PI - LS - 0.5 * r * r * isig2))

    rw = r * isig2
    dg0 = np.where(m1, 1.0 - 4.0 * s + 4.0 * s2, 0.0)
    dg1 = np.where(m1, 4.0 * s - 6.0 * s2, np.where(m2, 2.0 - 4.0 * s + 2.0 * s2, 0.0))
    dg2 = np.where(m1, 2.0 * s2, np.where(m2, -2.0 + 8.0 * s - 6.0 * s2, 0.0))
    dom1 = (-(4.0 * G1 - 4.0 * G0) * s - 2.0 * (4.0 * G0 - 6.0 * G1 + 2.0 * G2) * s2) / OM
    dom2 = (-(8.0 * G2 - 4.0 * G1) * s - 2.0 * (2.0 * G1 - 6.0 * G2) * s2) / OM
    dom = np.where(m1, dom1, np.where(m2, dom2, 0.0))
    grad = np.empty((n_runs, 5))
    grad[:, 0] = np.bincount(run, weights=rw * dg0, minlength=n_runs) * g0
    grad[:, 1] = np.bincount(run, weights=rw * dg1, minlength=n_runs) * g1
    grad[:, 2] = np.bincount(run, weights=rw * dg2, minlength=n_runs) * g2
    grad[:, 3] = np.bincount(run, weights=rw * dom, minlength=n_runs) * om
    grad[:, 4] = np.bincount(run, weights=r * rw - 1.0, minlength=n_runs)
    return ll, grad


def _quad_loglik_loop(t, y, run, g0, g1, om, sig, lsig, n_runs):
    ll = 0.0
    grad = np.zeros((n_runs, 4))
    n = t.shape[0]
    for i in range(n):
        k = run[i]
        w = om[k]
        ti = t[i]
        if ti < w:
            s = ti / w
            s2 = s * s
            g = g0[k] * (1.0 - 2.0 * s + s2) + g1[k] * (2.0 * s - 2.0 * s2)
            dg0 = 1.0 - 2.0 * s + s2
            dg1 = 2.0 * s - 2.0 * s2
            dom = (-(2.0 * g1[k] - 2.0 * g0[k]) * s - 2.0 * (g0[k] - 2.0 * g1[k]) * s2) / w
        else:
            g = 0.0
            dg0 = 0.0
            dg1 = 0.0
            dom = 0.0
        r = y[i] - g
        isig2 = 1.0 / (sig[k] * sig[k])
        ll += -0.5 * _LOG_2PI - lsig[k] - 0.5 * r * r * isig2
        rw = r * isig2
        grad[k, 0] += rw * dg0 * g0[k]
        grad[k, 1] += rw * dg1 * g1[k]
        grad[k, 2] += rw * dom * w
        grad[k, 3] += r * rw - 1.0
    return ll, grad


def _bspline_loglik_loop(t, y, run, g0, g1, g2, om, sig, lsig, n_runs):
    ll = 0.0
    grad = np.zeros((n_runs, 5))
    n = t.shape[0]
    for i in range(n):
        k = run[i]
        w = om[k]
        ti = t[i]
        if ti < 0.5 * w:
            s = ti / w
            s2 = s * s
            g = (g0[k] * (1.0 - 4.0 * s + 4.0 * s2)
                 + g1[k] * (4.0 * s - 6.0 * s2)
                 + g2[k] * (2.0 * s2))
            dg0 = 1.0 - 4.0 * s + 4.0 * s2
            dg1 = 4.0 * s - 6.0 * s2
            dg2 = 2.0 * s2
            dom = (-(4.0 * g1[k] - 4.0 * g0[k]) * s
                   - 2.0 * (4.0 * g0[k] - 6.0 * g1[k] + 2.0 * g2[k]) * s2) / w
        elif ti < w:
            s = ti / w
            s2 = s * s
            g = (g1[k] * (2.0 - 4.0 * s + 2.0 * s2)
                 + g2[k] * (-2.0 + 8.0 * s - 6.0 * s2))
            dg0 = 0.0
            dg1 = 2.0 - 4.0 * s + 2.0 * s2
            dg2 = -2.0 + 8.0 * s - 6.0 * s2
            dom = (-(8.0 * g2[k] - 4.0 * g1[k]) * s
                   - 2.0 * (2.0 * g1[k] - 6.0 * g2[k]) * s2) / w
        else:
            g = 0.0
            dg0 = 0.0
            dg1 = 0.0
            dg2 = 0.0
            dom = 0.0
        r = y[i] - g
        isig2 = 1.0 / (sig[k] * sig[k])
        ll += -0.5 * _LOG_2PI - lsig[k] - 0.5 * r * r * isig2
        rw = r * isig2
        grad[k, 0] += rw * dg0 * g0[k]
        grad[k, 1] += rw * dg1 * g1[k]
        grad[k, 2] += rw * dg2 * g2[k]
        grad[k, 3] += rw * dom * w
        grad[k, 4] += r * rw - 1.0
    return ll, grad


if NUMBA_ENABLED:
    quad_curve_numba = njit(cache=True)(_quad_curve_loop)
    bspline_curve_numba = njit(cache=True)(_bspline_curve_loop)
    quad_loglik_numba = njit(cache=True)(_quad_loglik_loop)
    bspline_loglik_numba = njit(cache=True)(_bspline_loglik_loop)

    quad_curve = quad_curve_numba
    bspline_curve = bspline_curve_numba
    quad_loglik = quad_loglik_numba
    bspline_loglik = bspline_loglik_numba
else:
    quad_curve_numba = None
    bspline_curve_numba = None
    quad_loglik_numba = None
    bspline_loglik_numba = None

    quad_curve = quad_curve_numpy
    bspline_curve = bspline_curve_numpy
    quad_loglik = quad_loglik_numpy
    bspline_loglik = bspline_loglik_numpy
