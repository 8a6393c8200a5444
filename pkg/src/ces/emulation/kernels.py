"""Anisotropic covariance kernels with analytic hyperparameter gradients.

Distances are scaled per dimension by the lengthscales, r^2 = sum_i
((x_i - x'_i) / ell_i)^2. Gradients are taken with respect to the log
hyperparameters (log amplitude, log lengthscales, log nugget), which is the
optimization parameterization.
"""

from dataclasses import dataclass

import numpy as np

FAMILIES = ("squared-exponential", "matern52")

_SQRT5 = np.sqrt(5.0)


@dataclass
class KernelSpec:
    family: str = "squared-exponential"
    amplitude: float = 1.0  # sigma^2
    lengthscales: np.ndarray = None  # (p,)
    noise_variance: float = 1e-6  # lambda^2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, float))
        if self.amplitude <= 0 or self.noise_variance < 0 or np.any(self.lengthscales <= 0):
            raise ValueError("kernel hyperparameters must be positive")


def _scaled_sq_dists(x1: np.ndarray, x2: np.ndarray, ells: np.ndarray) -> np.ndarray:
    """Per-dimension squared scaled differences, shape (n1, n2, p)."""
    diff = (x1[:, None, :] - x2[None, :, :]) / ells
    return diff * diff


def _smooth_part(family: str, amplitude: float, d2: np.ndarray):
    """Kernel values (without nugget) and the per-dimension log-lengthscale factor.

    Returns (k, g) where dk/dlog ell_i = g * d2[..., i].
    """
    r2 = d2.sum(axis=-1)
    if family == "squared-exponential":
        k = amplitude * np.exp(-0.5 * r2)
        return k, k
    r = np.sqrt(np.maximum(r2, 0.0))
    e = np.exp(-_SQRT5 * r)
    k = amplitude * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * e
    g = (5.0 / 3.0) * amplitude * (1.0 + _SQRT5 * r) * e
    return k, g


def kernel_matrix(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix without the nugget term."""
    d2 = _scaled_sq_dists(np.atleast_2d(x1), np.atleast_2d(x2), spec.lengthscales)
    k, _ = _smooth_part(spec.family, spec.amplitude, d2)
    return k


def kernel_matrix_with_grads(spec: KernelSpec, x: np.ndarray):
    """Training matrix K + lambda^2 I and its gradients w.r.t. log hyperparameters.

    Returns (K, grads) with grads a list ordered (log sigma^2, log ell_1..p,
    log lambda^2).
    """
    x = np.atleast_2d(x)
    n = x.shape[0]
    d2 = _scaled_sq_dists(x, x, spec.lengthscales)
    k, g = _smooth_part(spec.family, spec.amplitude, d2)
    full = k + spec.noise_variance * np.eye(n)
    grads = [k]  # d/dlog sigma^2
    for i in range(spec.lengthscales.size):
        grads.append(g * d2[..., i])
    grads.append(spec.noise_variance * np.eye(n))  # d/dlog lambda^2
    return full, grads


def kernel_eval(spec: KernelSpec, theta: np.ndarray, theta2: np.ndarray) -> float:
    """Pointwise kernel value including the nugget on exact coincidence."""
    theta = np.atleast_1d(np.asarray(theta, float))
    theta2 = np.atleast_1d(np.asarray(theta2, float))
    value = float(kernel_matrix(spec, theta[None, :], theta2[None, :])[0, 0])
    if np.array_equal(theta, theta2):
        value += spec.noise_variance
    return value
