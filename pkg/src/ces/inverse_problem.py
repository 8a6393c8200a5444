"""Problem container consumed by all three pipeline stages."""

from dataclasses import dataclass

import numpy as np

from ces.models.base import ForwardModel


@dataclass
class GaussianPrior:
    """Gaussian prior N(mean, cov) on the parameters."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, float))
        self.cov = np.atleast_2d(np.asarray(self.cov, float))
        p = self.mean.size
        if self.cov.shape != (p, p):
            raise ValueError("prior covariance shape does not match the mean")
        if not np.allclose(self.cov, self.cov.T):
            raise ValueError("prior covariance must be symmetric")
        # fails loudly for non-SPD input
        self.chol = np.linalg.cholesky(self.cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        xi = rng.standard_normal((size, self.dim))
        return self.mean + xi @ self.chol.T

    def precision_apply(self, v: np.ndarray) -> np.ndarray:
        """Gamma^-1 v via the cached Cholesky factor (v may be a matrix of rows)."""
        from scipy.linalg import cho_solve
        return cho_solve((self.chol, True), np.asarray(v, float).T).T

    def neg_log(self, theta: np.ndarray) -> float:
        """0.5 ||theta - mean||^2 in the prior norm (no constant)."""
        r = np.asarray(theta, float) - self.mean
        w = np.linalg.solve(self.chol, r)
        return 0.5 * float(w @ w)


@dataclass
class InverseProblem:
    """Data y = G(theta) + noise with Gaussian noise and Gaussian prior."""

    model: ForwardModel
    data: np.ndarray
    noise_cov: np.ndarray
    prior: GaussianPrior

    def __post_init__(self):
        self.data = np.atleast_1d(np.asarray(self.data, float))
        self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, float))
        d = self.data.size
        if self.noise_cov.shape != (d, d):
            raise ValueError("noise covariance shape does not match the data")
        if self.model.output_dim != d:
            raise ValueError("model output dimension does not match the data")
        if self.model.input_dim != self.prior.dim:
            raise ValueError("model input dimension does not match the prior")
