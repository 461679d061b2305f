"""Joint log posterior of the hierarchical model and MCMC sampling.

The sampled vector stacks, in order: the per-run log-scale curve
parameters (output-major), the regression coefficients, log tau per
output, and the five log correlation lengths. Positivity of tau and
delta is handled by sampling on the log scale with the matching
Jacobian; the two-piece shape restriction gamma2 <= gamma1 is a hard
support boundary (the log posterior is -inf beyond it, so gradient
trajectories reject and the fallback sampler rejects by Metropolis).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from . import kernels
from .curves import BSplineParams, QuadraticParams
from .data import TrainingData
from .emulator import (DEFAULT_NUGGET, DELTA_RATE, EmulatorHyper,
                       INTERCEPT_PRIORS, SLOPE_PRIOR_SD, TAU_SCALE, TAU_SHAPE,
                       log_prior_hyper, model_outputs)
from .errors import DataValidationError, InvalidParameterError, NumericalError

_LOG_2PI = math.log(2.0 * math.pi)
_GAMMALN_TAU = float(gammaln(TAU_SHAPE))
_LATENT_BOUND = 300.0     # |A| beyond this is treated as out of support
_LOG_SCALE_BOUND = 40.0   # bound on log tau / log delta during sampling


@dataclass
class ChainConfig:
    """Sampler settings; defaults mirror a four-chain desk-scale fit."""

    chains: int = 4
    iterations: int = 2000
    warmup: int = 1000
    seed: int = 0
    method: str = "hmc"            # "hmc" or "mwg"
    target_accept: float = 0.85
    leapfrog_steps: int = 24
    step_size: float = None        # None: bracketing heuristic
    jitter_sd: float = 0.05        # spread of per-chain initial points
    max_init_retries: int = 20
    threads: int = 1

    def validate(self):
        problems = []
        if self.chains < 1:
            problems.append("chains must be >= 1")
        if not 0 <= self.warmup < self.iterations:
            problems.append("need iterations > warmup >= 0")
        if self.method not in ("hmc", "mwg"):
            problems.append(f"unknown method {self.method!r}")
        if not 0.0 < self.target_accept < 1.0:
            problems.append("target_accept must lie in (0, 1)")
        if self.leapfrog_steps < 1:
            problems.append("leapfrog_steps must be >= 1")
        if problems:
            raise InvalidParameterError("; ".join(problems))


@dataclass
class ModelState:
    """One full configuration: per-run curve parameters plus hyperparameters."""

    params: list
    hyper: EmulatorHyper
    model: str

    def __post_init__(self):
        outputs = model_outputs(self.model)
        if tuple(self.hyper.outputs) != outputs:
            raise InvalidParameterError(
                f"hyperparameters cover {self.hyper.outputs}, expected {outputs}")
        want = BSplineParams if self.model == "bspline" else QuadraticParams
        for p in self.params:
            if not isinstance(p, want):
                raise InvalidParameterError(
                    f"run parameters of type {type(p).__name__} do not match "
                    f"model {self.model!r}")

    def latent_matrix(self):
        outputs = model_outputs(self.model)
        return np.array([[getattr(p, name) for name in outputs] for p in self.params]) \
            if self.params else np.empty((0, len(outputs)))


class Posterior:
    """Packed-vector view of the joint log posterior for one dataset."""

    def __init__(self, data: TrainingData, model="bspline", nugget=DEFAULT_NUGGET):
        self.data = data
        self.model = model
        self.nugget = float(nugget)
        self.outputs = model_outputs(model)
        self.L = len(self.outputs)
        self.N = data.n_runs
        n_lat = self.N * self.L
        self.sl_lat = slice(0, n_lat)
        self.sl_beta = slice(n_lat, n_lat + 6 * self.L)
        self.sl_ltau = slice(n_lat + 6 * self.L, n_lat + 7 * self.L)
        self.sl_ldelta = slice(n_lat + 7 * self.L, n_lat + 7 * self.L + 5)
        self.dim = n_lat + 7 * self.L + 5
        self.names = (
            [f"{out}[{rid}]" for out in self.outputs for rid in data.run_ids]
            + [f"beta_{out}[{j}]" for out in self.outputs for j in range(6)]
            + [f"tau_{out}" for out in self.outputs]
            + [f"delta_{k}" for k in range(1, 6)]
        )
        # prior constants in the packed layout
        self._b_mean = np.zeros((self.L, 6))
        self._b_sd = np.empty((self.L, 6))
        for i, name in enumerate(self.outputs):
            self._b_mean[i, 0], self._b_sd[i, 0] = INTERCEPT_PRIORS[name]
            self._b_sd[i, 1:] = SLOPE_PRIOR_SD[name]
        self._i_a1 = self.outputs.index("A1")
        self._i_a2 = self.outputs.index("A2") if "A2" in self.outputs else None
        self._run = data.run_index
        self._eye = np.eye(self.N)

    # -- packing ---------------------------------------------------------

    def pack(self, state: ModelState):
        if len(state.params) != self.N or state.model != self.model:
            raise InvalidParameterError("state does not match this posterior's layout")
        x = np.empty(self.dim)
        x[self.sl_lat] = state.latent_matrix().T.ravel()
        x[self.sl_beta] = state.hyper.beta.ravel()
        x[self.sl_ltau] = np.log(state.hyper.tau)
        x[self.sl_ldelta] = np.log(state.hyper.delta)
        return x

    def unpack(self, x):
        lat = x[self.sl_lat].reshape(self.L, self.N).T
        hyper = EmulatorHyper(self.outputs, x[self.sl_beta].reshape(self.L, 6).copy(),
                              np.exp(x[self.sl_ltau]), np.exp(x[self.sl_ldelta]),
                              self.nugget)
        cls = BSplineParams if self.model == "bspline" else QuadraticParams
        params = [cls(*lat[i]) for i in range(self.N)]
        return ModelState(params, hyper, self.model)

    def natural(self, x):
        """Draw vector with tau and delta mapped back to their own scale."""
        out = x.copy()
        out[self.sl_ltau] = np.exp(x[self.sl_ltau])
        out[self.sl_ldelta] = np.exp(x[self.sl_ldelta])
        return out

    # -- log posterior ---------------------------------------------------

    def _in_support(self, x):
        if not np.all(np.isfinite(x)):
            return False
        if np.any(np.abs(x[self.sl_lat]) > _LATENT_BOUND):
            return False
        if np.any(np.abs(x[self.sl_ltau]) > _LOG_SCALE_BOUND):
            return False
        if np.any(np.abs(x[self.sl_ldelta]) > _LOG_SCALE_BOUND):
            return False
        if self._i_a2 is not None and self.N:
            lat = x[self.sl_lat].reshape(self.L, self.N)
            if np.any(lat[self._i_a2] > lat[self._i_a1]):
                return False
        return True

    def _likelihood(self, lat):
        t, y, run = self.data.t_flat, self.data.y_flat, self._run
        if self.model == "bspline":
            a0, a1, a2, aw, asg = lat
            ll, grad = kernels.bspline_loglik(t, y, run, np.exp(a0), np.exp(a1),
                                              np.exp(a2), np.exp(aw), np.exp(asg),
                                              asg, self.N)
        else:
            a0, a1, aw, asg = lat
            ll, grad = kernels.quad_loglik(t, y, run, np.exp(a0), np.exp(a1),
                                           np.exp(aw), np.exp(asg), asg, self.N)
        return ll, grad

    def _gp_terms(self, lat, beta, tau, delta, with_grad):
        """GP layer: value and gradients wrt latents, beta, log tau, log delta."""
        n, L = self.N, self.L
        d2 = self.data.d2
        e = np.exp(-np.sum(d2 / (delta * delta), axis=-1))
        u = e + self.nugget * self._eye
        try:
            cho = cho_factor(u, lower=True)
        except np.linalg.LinAlgError:
            return None
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
        resid = lat.T - self.data.h @ beta.T            # (n, L)
        w = cho_solve(cho, resid)                       # (n, L)
        qf = np.einsum("il,il->l", resid, w)
        value = float(np.sum(-0.5 * n * _LOG_2PI - 0.5 * n * np.log(tau)
                             - 0.5 * logdet - 0.5 * qf / tau))
        if not with_grad:
            return value, None, None, None, None
        g_lat = (-w / tau).T                            # (L, n)
        g_beta = (self.data.h.T @ w / tau).T            # (L, 6)
        g_ltau = -0.5 * n + 0.5 * qf / tau
        uinv = cho_solve(cho, self._eye)
        g_ldelta = np.empty(5)
        wt = w / tau                                    # (n, L)
        for k in range(5):
            gk = e * d2[:, :, k]
            trace_term = float(np.sum(uinv * gk))
            quad_term = float(np.einsum("il,ij,jl->", wt, gk, w))
            g_ldelta[k] = (-L * trace_term + quad_term) / (delta[k] * delta[k])
        return value, g_lat, g_beta, g_ltau, g_ldelta

    def _hyper_prior(self, beta, ltau, ldelta, with_grad):
        zb = (beta - self._b_mean) / self._b_sd
        value = float(np.sum(-np.log(self._b_sd) - 0.5 * _LOG_2PI - 0.5 * zb * zb))
        # inverse-gamma on tau and exponential on delta, with the log-scale Jacobian
        tau = np.exp(ltau)
        delta = np.exp(ldelta)
        value += float(np.sum(TAU_SHAPE * math.log(TAU_SCALE) - _GAMMALN_TAU
                              - TAU_SHAPE * ltau - TAU_SCALE / tau))
        value += float(np.sum(math.log(DELTA_RATE) + ldelta - DELTA_RATE * delta))
        if not with_grad:
            return value, None, None, None
        g_beta = -zb / self._b_sd
        g_ltau = -TAU_SHAPE + TAU_SCALE / tau
        g_ldelta = 1.0 - DELTA_RATE * delta
        return value, g_beta, g_ltau, g_ldelta

    def logp(self, x):
        return self._evaluate(x, with_grad=False)[0]

    def logp_grad(self, x):
        return self._evaluate(x, with_grad=True)

    def _evaluate(self, x, with_grad):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise InvalidParameterError(f"expected a vector of length {self.dim}")
        if not self._in_support(x):
            return -math.inf, np.zeros(self.dim)
        beta = x[self.sl_beta].reshape(self.L, 6)
        ltau = x[self.sl_ltau]
        ldelta = x[self.sl_ldelta]
        total, grad = 0.0, np.zeros(self.dim)

        hp = self._hyper_prior(beta, ltau, ldelta, with_grad)
        total += hp[0]
        if with_grad:
            grad[self.sl_beta] = hp[1].ravel()
            grad[self.sl_ltau] = hp[2]
            grad[self.sl_ldelta] = hp[3]

        if self.N:
            lat = x[self.sl_lat].reshape(self.L, self.N)
            ll, ll_grad = self._likelihood(lat)
            if not math.isfinite(ll):
                return -math.inf, np.zeros(self.dim)
            total += ll
            gp = self._gp_terms(lat, beta, np.exp(ltau), np.exp(ldelta), with_grad)
            if gp is None:
                return -math.inf, np.zeros(self.dim)
            total += gp[0]
            if with_grad:
                grad[self.sl_lat] += ll_grad.T.ravel() + gp[1].ravel()
                grad[self.sl_beta] += gp[2].ravel()
                grad[self.sl_ltau] += gp[3]
                grad[self.sl_ldelta] += gp[4]
        return total, grad

    # -- initial points ---------------------------------------------------

    def initial_vector(self):
        """Least-squares curve fits per run, hyperparameters near the data."""
        lat = np.empty((self.N, self.L))
        for i, s in enumerate(self.data.series):
            lat[i] = _least_squares_latents(s, self.model)
        x = np.empty(self.dim)
        x[self.sl_lat] = lat.T.ravel()
        beta = np.zeros((self.L, 6))
        tau = np.full(self.L, TAU_SCALE / (TAU_SHAPE - 1.0))
        if self.N:
            beta[:, 0] = lat.mean(axis=0)
            if self.N > 1:
                tau = np.clip(lat.var(axis=0, ddof=1), 0.05, 2.0)
        else:
            beta[:, 0] = [INTERCEPT_PRIORS[name][0] for name in self.outputs]
        x[self.sl_beta] = beta.ravel()
        x[self.sl_ltau] = np.log(tau)
        x[self.sl_ldelta] = math.log(2.0)
        return x


def _least_squares_latents(series, model):
    """Constrained least-squares fit of one run's curve (initialisation)."""
    t, y = series.years, series.y
    omega0 = 1.5 * t[-1] if series.censored else t[-1] + 1.0
    s = t / omega0
    if model == "bspline":
        first = s < 0.5
        basis = np.zeros((t.size, 3))
        basis[first, 0] = (1.0 - 2.0 * s[first]) ** 2
        basis[first, 1] = 2.0 * s[first] * (2.0 - 3.0 * s[first])
        basis[first, 2] = 2.0 * s[first] ** 2
        basis[~first, 1] = 2.0 * (1.0 - s[~first]) ** 2
        basis[~first, 2] = 2.0 * (1.0 - s[~first]) * (3.0 * s[~first] - 1.0)
    else:
        basis = np.column_stack([(1.0 - s) ** 2, 2.0 * s * (1.0 - s)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    coef = np.maximum(coef, 1e-2)
    if model == "bspline":
        coef[2] = min(coef[2], coef[1])
    resid = y - basis @ coef
    sigma0 = max(float(resid.std()), 1e-3)
    logs = np.log(coef)
    if model == "bspline":
        return np.array([logs[0], logs[1], logs[2], math.log(omega0), math.log(sigma0)])
    return np.array([logs[0], logs[1], math.log(omega0), math.log(sigma0)])


# -- public wrappers -------------------------------------------------------


def log_likelihood(state: ModelState, data: TrainingData):
    """Sum of Gaussian log densities of every observation around its curve."""
    post = Posterior(data, state.model, state.hyper.zeta)
    if data.n_runs == 0:
        return 0.0
    lat = state.latent_matrix().T
    ll, _ = post._likelihood(lat)
    return ll


def log_posterior(state: ModelState, data: TrainingData):
    """Likelihood + GP layer + hyperprior on the natural (tau, delta) scale.

    Returns -inf for any support violation (non-positive tau or delta,
    gamma2 > gamma1 under the two-piece model).
    """
    hp = log_prior_hyper(state.hyper, state.model)
    if not math.isfinite(hp):
        return -math.inf
    post = Posterior(data, state.model, state.hyper.zeta)
    x = post.pack(state)
    value = post.logp(x)
    if not math.isfinite(value):
        return -math.inf
    # remove the sampling-space Jacobian to report the natural-scale density
    jac = float(np.sum(x[post.sl_ltau]) + np.sum(x[post.sl_ldelta]))
    return value - jac


@dataclass
class PosteriorDraws:
    """Post-warmup draws, natural scale, with chain labels and names."""

    names: list
    values: np.ndarray            # (chains, draws, dim)
    model: str
    run_ids: list
    chain_stats: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.names)}

    @property
    def n_chains(self):
        return self.values.shape[0]

    @property
    def n_draws(self):
        return self.values.shape[1]

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise DataValidationError(f"no parameter named {name!r}") from None

    def get(self, name):
        """Draws of one parameter, shape (chains, draws)."""
        return self.values[:, :, self.index(name)]

    def flat(self, name):
        return self.get(name).reshape(-1)

    def flat_all(self):
        return self.values.reshape(-1, self.values.shape[2])

    @property
    def outputs(self):
        return model_outputs(self.model)

    def latents(self):
        """(total draws, runs, outputs) latent array across all chains."""
        cols = np.array([[self.index(f"{out}[{rid}]") for out in self.outputs]
                         for rid in self.run_ids])
        flat = self.flat_all()
        return flat[:, cols]

    def hyper_arrays(self):
        """beta (S, L, 6), tau (S, L), delta (S, 5) across all chains."""
        flat = self.flat_all()
        beta = np.stack([flat[:, [self.index(f"beta_{out}[{j}]") for j in range(6)]]
                         for out in self.outputs], axis=1)
        tau = flat[:, [self.index(f"tau_{out}") for out in self.outputs]]
        delta = flat[:, [self.index(f"delta_{k}") for k in range(1, 6)]]
        return beta, tau, delta


# -- samplers ---------------------------------------------------------------


class _DualAveraging:
    """Nesterov-style step-size adaptation towards a target accept rate."""

    def __init__(self, step, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * step)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.m = 0
        self.h_bar = 0.0
        self.log_eps = math.log(step)
        self.log_eps_bar = 0.0

    def update(self, accept_prob):
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        w = self.m ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    def finalize(self):
        return math.exp(self.log_eps_bar)

    def restart(self, step):
        self.mu = math.log(10.0 * step)
        self.m = 0
        self.h_bar = 0.0
        self.log_eps = math.log(step)
        self.log_eps_bar = 0.0


def _find_step_size(post, x, inv_mass, rng, init=0.1):
    """Bracket a step size giving roughly 50% accept for one leapfrog step."""
    eps = init
    logp, grad = post.logp_grad(x)
    p = rng.standard_normal(post.dim) / np.sqrt(inv_mass)
    h0 = -logp + 0.5 * float(np.sum(p * p * inv_mass))

    def one_step(eps):
        p1 = p + 0.5 * eps * grad
        x1 = x + eps * inv_mass * p1
        lp1, g1 = post.logp_grad(x1)
        p1 = p1 + 0.5 * eps * g1
        h1 = -lp1 + 0.5 * float(np.sum(p1 * p1 * inv_mass))
        return h0 - h1

    delta = one_step(eps)
    if not math.isfinite(delta):
        delta = -math.inf
    direction = 1.0 if delta > math.log(0.5) else -1.0
    for _ in range(60):
        eps *= 2.0 ** direction
        delta = one_step(eps)
        if not math.isfinite(delta):
            delta = -math.inf
        if (direction > 0) != (delta > math.log(0.5)):
            break
        if eps < 1e-12 or eps > 1e6:
            break
    return max(eps, 1e-12)


def _mass_windows(warmup, init_buffer=75, term_buffer=50, base_window=25):
    """Stan-style expanding adaptation windows inside the warmup phase."""
    if warmup < 2 * (init_buffer + term_buffer + base_window):
        init_buffer = int(0.15 * warmup)
        term_buffer = int(0.10 * warmup)
        base_window = warmup - init_buffer - term_buffer
        if base_window < 10:
            return []
        return [(init_buffer, warmup - term_buffer)]
    windows = []
    pos, size = init_buffer, base_window
    limit = warmup - term_buffer
    while True:
        end = pos + size
        if end + 2 * size > limit:
            windows.append((pos, limit))
            break
        windows.append((pos, end))
        pos, size = end, 2 * size
    return windows


def _hmc_chain(post, x0, cfg, rng):
    dim = post.dim
    inv_mass = np.ones(dim)
    x = x0.copy()
    logp, grad = post.logp_grad(x)
    if not math.isfinite(logp):
        raise NumericalError("initial point has non-finite log posterior")
    eps = cfg.step_size or _find_step_size(post, x, inv_mass, rng)
    da = _DualAveraging(eps, cfg.target_accept)
    windows = _mass_windows(cfg.warmup)
    win_idx = 0
    acc = np.zeros(dim)
    acc2 = np.zeros(dim)
    acc_n = 0

    kept = cfg.iterations - cfg.warmup
    draws = np.empty((kept, dim))
    n_div = 0
    accept_sum = 0.0
    lo = max(1, int(math.ceil(cfg.leapfrog_steps / 2)))
    hi = max(lo, int(math.floor(1.5 * cfg.leapfrog_steps)))

    for it in range(cfg.iterations):
        n_leap = int(rng.integers(lo, hi + 1))
        p0 = rng.standard_normal(dim) / np.sqrt(inv_mass)
        h0 = -logp + 0.5 * float(np.sum(p0 * p0 * inv_mass))
        x1, lp1, g1 = x, logp, grad
        p1 = p0 + 0.5 * eps * g1
        diverged = False
        for step in range(n_leap):
            x1 = x1 + eps * inv_mass * p1
            lp1, g1 = post.logp_grad(x1)
            if not math.isfinite(lp1):
                diverged = True
                break
            if step < n_leap - 1:
                p1 = p1 + eps * g1
        if not diverged:
            p1 = p1 + 0.5 * eps * g1
            h1 = -lp1 + 0.5 * float(np.sum(p1 * p1 * inv_mass))
            delta_h = h0 - h1
            if not math.isfinite(delta_h):
                diverged = True
            elif -delta_h > 1000.0:
                diverged = True
        accept_prob = 0.0 if diverged else min(1.0, math.exp(min(0.0, h0 - h1)))
        if not diverged and rng.random() < accept_prob:
            x, logp, grad = x1, lp1, g1

        if it < cfg.warmup:
            eps = da.update(accept_prob)
            if win_idx < len(windows):
                start, end = windows[win_idx]
                if start <= it:
                    acc += x
                    acc2 += x * x
                    acc_n += 1
                if it == end - 1:
                    var = acc2 / acc_n - (acc / acc_n) ** 2
                    wgt = acc_n / (acc_n + 5.0)
                    inv_mass = np.maximum(wgt * var + (1.0 - wgt) * 1e-3, 1e-10)
                    acc[:] = 0.0
                    acc2[:] = 0.0
                    acc_n = 0
                    win_idx += 1
                    eps = _find_step_size(post, x, inv_mass, rng, init=eps)
                    da.restart(eps)
            if it == cfg.warmup - 1:
                eps = da.finalize()
        else:
            draws[it - cfg.warmup] = x
            accept_sum += accept_prob
            n_div += int(diverged)

    stats = {"accept_rate": accept_sum / max(kept, 1), "divergences": n_div,
             "step_size": eps}
    return draws, stats


def _mwg_chain(post, x0, cfg, rng):
    """Adaptive Metropolis-within-Gibbs fallback (gradient-free)."""
    dim = post.dim
    x = x0.copy()
    logp = post.logp(x)
    if not math.isfinite(logp):
        raise NumericalError("initial point has non-finite log posterior")
    scales = np.full(dim, 0.1)
    batch_acc = np.zeros(dim)
    batch_n = 0
    kept = cfg.iterations - cfg.warmup
    draws = np.empty((kept, dim))
    accept_sum = 0.0
    n_batches = 0
    for it in range(cfg.iterations):
        accepted = 0
        for j in range(dim):
            proposal = x.copy()
            proposal[j] += scales[j] * rng.standard_normal()
            lp = post.logp(proposal)
            if math.log(rng.random()) < lp - logp:
                x, logp = proposal, lp
                batch_acc[j] += 1
                accepted += 1
        batch_n += 1
        if it < cfg.warmup and batch_n == 50:
            n_batches += 1
            adj = min(0.1, 1.0 / math.sqrt(n_batches))
            rate = batch_acc / batch_n
            scales *= np.exp(np.where(rate > 0.44, adj, -adj))
            batch_acc[:] = 0.0
            batch_n = 0
        if it >= cfg.warmup:
            draws[it - cfg.warmup] = x
            accept_sum += accepted / dim
    stats = {"accept_rate": accept_sum / max(kept, 1), "divergences": 0,
             "step_size": float(np.median(scales))}
    return draws, stats


def _chain_initial_point(post, base, cfg, rng):
    for _ in range(cfg.max_init_retries):
        x = base + cfg.jitter_sd * rng.standard_normal(post.dim)
        if post._i_a2 is not None and post.N:
            lat = x[post.sl_lat].reshape(post.L, post.N)
            lat[post._i_a2] = np.minimum(lat[post._i_a2], lat[post._i_a1])
            x[post.sl_lat] = lat.ravel()
        if math.isfinite(post.logp(x)):
            return x
    raise NumericalError(
        f"no finite initial log posterior after {cfg.max_init_retries} jittered tries")


def _run_single_chain(args):
    data, model, nugget, cfg, seed_seq, chain_id = args
    post = Posterior(data, model, nugget)
    rng = np.random.default_rng(seed_seq)
    base = post.initial_vector()
    x0 = _chain_initial_point(post, base, cfg, rng)
    runner = _hmc_chain if cfg.method == "hmc" else _mwg_chain
    draws, stats = runner(post, x0, cfg, rng)
    stats["chain"] = chain_id
    # report tau and delta on their natural scale
    draws[:, post.sl_ltau] = np.exp(draws[:, post.sl_ltau])
    draws[:, post.sl_ldelta] = np.exp(draws[:, post.sl_ldelta])
    return draws, stats


def run_mcmc(data: TrainingData, model="bspline", config: ChainConfig = None,
             nugget=DEFAULT_NUGGET):
    """Draw posterior samples; deterministic for a fixed seed.

    Chains are seeded independently (so execution order cannot change
    the result) and run sequentially unless ``config.threads > 1``, in
    which case they run in separate processes.
    """
    cfg = config or ChainConfig()
    cfg.validate()
    post = Posterior(data, model, nugget)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    jobs = [(data, model, nugget, cfg, seeds[c], c) for c in range(cfg.chains)]
    if cfg.threads > 1 and cfg.chains > 1:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=min(cfg.threads, cfg.chains)) as pool:
            results = list(pool.map(_run_single_chain, jobs))
    else:
        results = [_run_single_chain(job) for job in jobs]
    values = np.stack([r[0] for r in results])
    stats = [r[1] for r in results]
    meta = {"model": model, "iterations": cfg.iterations, "warmup": cfg.warmup,
            "seed": cfg.seed, "method": cfg.method, "nugget": nugget,
            "chains": cfg.chains}
    return PosteriorDraws(names=post.names, values=values, model=model,
                          run_ids=list(data.run_ids), chain_stats=stats, meta=meta)
