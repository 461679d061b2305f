"""MCMC convergence diagnostics: split R-hat, effective sample size, flags.

R-hat follows the rank-normalised split formulation: each chain is
halved, the pooled draws are converted to normal scores through their
ranks, and the classic between/within variance ratio is computed on the
scores. ESS uses the same rank-normalised split chains with Geyer's
initial-monotone-sequence truncation of the combined autocorrelations.
Parameters with no variation at all are reported as converged
(R-hat exactly 1) rather than undefined.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import DataValidationError

RHAT_THRESHOLD = 1.05


def _split_chains(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    half = n // 2
    if half < 1:
        raise DataValidationError("need at least two draws per chain to split")
    return np.vstack([x[:, :half], x[:, n - half:]])


def rank_normalize(x):
    """Map draws to normal scores via pooled fractional ranks."""
    x = np.asarray(x, dtype=float)
    ranks = rankdata(x.ravel(), method="average").reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def _basic_rhat(chains):
    m, n = chains.shape
    means = chains.mean(axis=1)
    w = chains.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w == 0.0:
        return 1.0 if b == 0.0 else math.inf
    return math.sqrt(((n - 1.0) / n * w + b / n) / w)


def split_rhat(x):
    """Rank-normalised split R-hat of one parameter, draws shaped (chains, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] < 2:
        raise DataValidationError("R-hat needs at least two chains")
    if np.all(x == x.ravel()[0]):
        return 1.0
    return _basic_rhat(rank_normalize(_split_chains(x)))


def _autocovariance(chain):
    n = chain.size
    centred = chain - chain.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centred, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real
    return acov / n


def ess_bulk(x):
    """Effective sample size of rank-normalised split chains."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.all(x == x.ravel()[0]):
        return float("nan")
    z = rank_normalize(_split_chains(x))
    m, n = z.shape
    if n < 4:
        raise DataValidationError("need at least four draws for an ESS estimate")
    acov = np.stack([_autocovariance(z[j]) for j in range(m)])
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = chain_var.mean()
    mean_acov = acov.mean(axis=0)
    var_plus = mean_acov[0] * (n - 1.0) / n
    if m > 1:
        var_plus += z.mean(axis=1).var(ddof=1)
    if var_plus == 0.0:
        return float("nan")
    rho = 1.0 - (w - mean_acov) / var_plus
    # Geyer pairwise sums, truncated at the first negative, forced monotone
    max_pairs = (n - 1) // 2
    tau = rho[0]
    prev_pair = math.inf
    for k in range(1, max_pairs + 1):
        pair = rho[2 * k - 1] + rho[2 * k]
        if pair < 0.0:
            break
        pair = min(pair, prev_pair)
        prev_pair = pair
        tau += 2.0 * pair
    ess = m * n / max(tau, 1e-12)
    return float(min(ess, m * n * math.log10(max(m * n, 10))))


def _disjoint_chains(x, spread=2.0):
    """True when some pair of chains occupies non-overlapping value ranges."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    means = x.mean(axis=1)
    sds = x.std(axis=1, ddof=1) if x.shape[1] > 1 else np.zeros(x.shape[0])
    lo = means - spread * sds
    hi = means + spread * sds
    order = np.argsort(means)
    for a, b in zip(order[:-1], order[1:]):
        if lo[b] > hi[a] and means[b] > means[a]:
            return True
    return False


@dataclass
class DiagnosticsReport:
    """Per-parameter convergence summary plus sampler-level notes."""

    rhat: dict
    ess: dict
    flagged: list                      # parameters with R-hat above threshold
    multimodal: list                   # parameters whose chains look disjoint
    threshold: float = RHAT_THRESHOLD
    notes: list = field(default_factory=list)
    chain_stats: list = field(default_factory=list)

    @property
    def converged(self):
        return not self.flagged

    @property
    def multimodality_suspected(self):
        return bool(self.multimodal)


def diagnostics(draws, threshold=RHAT_THRESHOLD):
    """Convergence report for a :class:`PosteriorDraws` object.

    With a single chain only ESS is computed. A parameter is flagged
    when its rank-normalised split R-hat exceeds ``threshold``; chains
    sitting in visibly disjoint regions are additionally reported as
    possible multimodality (high R-hat alone cannot distinguish slow
    mixing from separated modes).
    """
    rhat, ess, flagged, multimodal = {}, {}, [], []
    single = draws.n_chains < 2
    for name in draws.names:
        x = draws.get(name)
        ess[name] = ess_bulk(x)
        if single:
            rhat[name] = float("nan")
            continue
        rhat[name] = split_rhat(x)
        if rhat[name] > threshold:
            flagged.append(name)
        if _disjoint_chains(x):
            multimodal.append(name)
    notes = []
    if multimodal:
        notes.append(
            "chains occupy disjoint high-density regions for "
            f"{len(multimodal)} parameter(s) (e.g. {multimodal[0]}); "
            "this may hint at a multimodal posterior")
    if single:
        notes.append("single chain: R-hat unavailable, ESS only")
    return DiagnosticsReport(rhat=rhat, ess=ess, flagged=flagged,
                             multimodal=multimodal, threshold=threshold,
                             notes=notes, chain_stats=list(draws.chain_stats))
