"""Forward-map abstraction shared by all benchmark models."""

import numpy as np


class ModelError(Exception):
    """A forward-model evaluation failed."""


class DivergenceError(ModelError):
    """Trajectory blew up (non-finite state) during integration."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"trajectory diverged at t={time:.6g}")


class ForwardModel:
    """Map G: R^p -> R^d, possibly stochastic through a carried state.

    Subclasses set `input_dim` and `output_dim` and implement `evaluate`.
    """

    input_dim: int
    output_dim: int

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.input_dim,):
            raise ModelError(
                f"expected parameter vector of length {self.input_dim}, "
                f"got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ModelError("non-finite entries in parameter vector")
        return theta
