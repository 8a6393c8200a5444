"""Random-walk Metropolis sampling of the emulator posterior, with diagnostics.

The chain starts at the final calibration ensemble mean and proposes Gaussian
steps shaped by the final ensemble covariance. The target density combines a
misfit (negative log-likelihood) with the Gaussian prior.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ces.inverse_problem import GaussianPrior
from ces.models.base import ModelError

log = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)
IACT_CAP_NOTE = "chain shows no variation; integrated autocorrelation capped at chain length"


@dataclass
class ProposalSpec:
    """Gaussian random-walk proposal N(0, scale^2 * cov)."""

    cov: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        self.cov = np.atleast_2d(np.asarray(self.cov, float))
        if self.scale <= 0:
            raise ValueError("proposal scale must be positive")
        self.chol = self.scale * np.linalg.cholesky(self.cov)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.chol @ rng.standard_normal(self.cov.shape[0])


@dataclass
class Chain:
    samples: np.ndarray  # (n_samples, p); row 0 is the initial state
    log_posts: np.ndarray  # (n_samples,)
    accept_flags: np.ndarray  # (n_samples,) bool; row 0 always True
    seed: int
    misfit_kind: str = ""
    theta0: np.ndarray = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, float))
        self.log_posts = np.asarray(self.log_posts, float)
        self.accept_flags = np.asarray(self.accept_flags, bool)
        if self.theta0 is None:
            self.theta0 = self.samples[0].copy()

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        n = self.n_samples - 1
        return float(self.accept_flags[1:].sum()) / n if n else 0.0

    def tail(self, burn_in: int) -> np.ndarray:
        if not 0 <= burn_in < self.n_samples:
            raise ValueError("burn-in outside the chain length")
        return self.samples[burn_in:]


def log_post(theta: np.ndarray, misfit, prior: GaussianPrior) -> float:
    """Unnormalized log posterior: -misfit(theta) - prior quadratic."""
    return -float(misfit(theta)) - prior.neg_log(theta)


def rwm_step(theta: np.ndarray, current_lp: float, misfit, prior: GaussianPrior,
             proposal: ProposalSpec, rng: np.random.Generator):
    """One Metropolis step. Returns (theta, log-post, accepted).

    A forward-evaluation failure at the proposal counts as a rejection.
    """
    candidate = theta + proposal.draw(rng)
    try:
        candidate_lp = log_post(candidate, misfit, prior)
    except ModelError as exc:
        log.warning("proposal rejected, forward evaluation failed: %s", exc)
        return theta, current_lp, False
    if np.log(rng.uniform()) < candidate_lp - current_lp:
        return candidate, candidate_lp, True
    return theta, current_lp, False


def run_chain(misfit, prior: GaussianPrior, theta0: np.ndarray,
              proposal: ProposalSpec, n_samples: int, seed: int = 0) -> Chain:
    """n_samples chain states starting at theta0 (n_samples - 1 Metropolis steps)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    theta = np.atleast_1d(np.asarray(theta0, float)).copy()
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    lp = log_post(theta, misfit, prior)

    samples = np.empty((n_samples, theta.size))
    log_posts = np.empty(n_samples)
    flags = np.zeros(n_samples, bool)
    samples[0], log_posts[0], flags[0] = theta, lp, True
    for step in range(1, n_samples):
        theta, lp, ok = rwm_step(theta, lp, misfit, prior, proposal, rng)
        samples[step], log_posts[step], flags[step] = theta, lp, ok
    kind = getattr(misfit, "kind", "")
    return Chain(samples, log_posts, flags, seed, kind, samples[0].copy())


def integrated_autocorrelation(series: np.ndarray) -> float:
    """IACT by summing autocorrelations up to the first small/negative lag.

    Constant chains have undefined autocorrelation; they are capped at the
    chain length with a warning, signaling a completely stuck sampler.
    """
    x = np.asarray(series, float)
    n = x.size
    var = x.var()
    if var == 0.0 or n < 2:
        log.warning(IACT_CAP_NOTE)
        return float(n)
    centered = x - x.mean()
    # autocovariance via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, m)
    acf = np.fft.irfft(f * np.conj(f), m)[:n].real
    rho = acf / acf[0]
    tau = 1.0
    for k in range(1, n // 3):
        if rho[k] < 0.05:
            break
        tau += 2.0 * rho[k]
    return float(min(tau, n))


def running_mean(samples: np.ndarray) -> np.ndarray:
    """Cumulative mean along the chain, same shape as the input."""
    samples = np.atleast_2d(np.asarray(samples, float))
    counts = np.arange(1, samples.shape[0] + 1)[:, None]
    return np.cumsum(samples, axis=0) / counts


def chain_diagnostics(chain: Chain, burn_in: int = 0) -> dict:
    """Summary statistics of the post-burn-in chain.

    Returns per-parameter means, standard deviations, quantiles at
    (2.5, 25, 50, 75, 97.5)%, integrated autocorrelation times, effective
    sample sizes, plus the overall acceptance rate.
    """
    tail = chain.tail(burn_in)
    n, p = tail.shape
    quantiles = np.quantile(tail, QUANTILE_LEVELS, axis=0)
    iact = np.array([integrated_autocorrelation(tail[:, i]) for i in range(p)])
    return {
        "n_samples": n,
        "burn_in": burn_in,
        "acceptance_rate": chain.acceptance_rate,
        "mean": tail.mean(axis=0),
        "std": tail.std(axis=0, ddof=1) if n > 1 else np.zeros(p),
        "quantile_levels": list(QUANTILE_LEVELS),
        "quantiles": quantiles,  # (len(levels), p)
        "iact": iact,
        "ess": n / iact,
    }
