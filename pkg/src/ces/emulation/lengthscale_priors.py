"""Gamma priors on GP lengthscales elicited from the training design.

For each input dimension the prior's (2.5%, 97.5%) quantiles are pinned to
(min positive pairwise distance / 10, max pairwise distance / 3): shorter
scales than the design can resolve, and longer scales than the design spans,
are both discouraged. The shape parameter is found by one-dimensional root
finding on the scale-free quantile ratio.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import gamma as gamma_dist

log = logging.getLogger(__name__)

QUANTILES = (0.025, 0.975)


@dataclass
class GammaPrior:
    """Gamma(shape, scale) distribution on a positive lengthscale."""

    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("Gamma parameters must be positive")

    def log_pdf(self, ell: float) -> float:
        return float(gamma_dist.logpdf(ell, self.shape, scale=self.scale))

    def dlog_pdf_dlog(self, ell: float) -> float:
        """d/d(log ell) of log_pdf, used when optimizing over log lengthscales."""
        return (self.shape - 1.0) - ell / self.scale

    def mean(self) -> float:
        return self.shape * self.scale

    def quantile(self, q: float) -> float:
        return float(gamma_dist.ppf(q, self.shape, scale=self.scale))


def gamma_from_quantiles(lo: float, hi: float,
                         q_lo: float = QUANTILES[0],
                         q_hi: float = QUANTILES[1]) -> GammaPrior:
    """Gamma prior whose (q_lo, q_hi) quantiles equal (lo, hi)."""
    if not (0 < lo < hi):
        raise ValueError("quantile targets must satisfy 0 < lo < hi")
    target = hi / lo

    def ratio_mismatch(log_shape):
        k = np.exp(log_shape)
        denom = gamma_dist.ppf(q_lo, k)
        if denom <= 0.0:  # ppf underflow at tiny shape: ratio is effectively infinite
            return 1e300
        return gamma_dist.ppf(q_hi, k) / denom - target

    # the quantile ratio decreases monotonically in the shape; bracket it
    lo_b, hi_b = -10.0, 15.0
    if ratio_mismatch(lo_b) < 0 or ratio_mismatch(hi_b) > 0:
        raise ValueError(f"quantile ratio {target:g} outside the representable range")
    shape = float(np.exp(brentq(ratio_mismatch, lo_b, hi_b, xtol=1e-12)))
    scale = lo / gamma_dist.ppf(q_lo, shape)
    return GammaPrior(shape, float(scale))


def elicit_lengthscale_priors(design: np.ndarray) -> list[GammaPrior | None]:
    """Per-dimension Gamma priors from the pairwise distances of the design.

    A dimension with no spread (all coordinates equal) gets no prior (None)
    and a warning, leaving the likelihood alone for that lengthscale.
    """
    x = np.atleast_2d(np.asarray(design, float))
    priors: list[GammaPrior | None] = []
    for i in range(x.shape[1]):
        d = np.abs(x[:, None, i] - x[None, :, i])
        pos = d[d > 0]
        if pos.size == 0:
            log.warning("design dimension %d is degenerate; no lengthscale prior", i)
            priors.append(None)
            continue
        priors.append(gamma_from_quantiles(pos.min() / 10.0, pos.max() / 3.0))
    return priors
