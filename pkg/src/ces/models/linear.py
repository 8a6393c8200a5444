"""Linear benchmark model G(theta) = G theta with Gaussian random rows."""

import numpy as np

from ces.models.base import ForwardModel

# Row distribution of the random matrix: unit variances, strong negative
# cross-correlation.
ROW_COV = np.array([[1.0, -0.9], [-0.9, 1.0]])


class LinearModel(ForwardModel):
    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-d")
        self.matrix = matrix
        self.output_dim, self.input_dim = matrix.shape

    @classmethod
    def random(cls, output_dim: int = 10, seed: int = 0) -> "LinearModel":
        """Draw each of the d rows from N(0, ROW_COV) with a fixed seed."""
        rng = np.random.default_rng(seed)
        rows = rng.multivariate_normal(np.zeros(2), ROW_COV, size=output_dim)
        return cls(rows)

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = self._check_theta(theta)
        return self.matrix @ theta
