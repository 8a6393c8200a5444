"""Truncated Karhunen-Loeve cosine expansion of a log-normal random field."""

import numpy as np

from ces.models.base import ModelError


def _mode_indices(n_modes: int) -> np.ndarray:
    """First n_modes lattice indices ordered by non-increasing eigenvalue.

    The basis cos(pi <l, x>) identifies l with -l, so one representative per
    pair is enumerated: l1 > 0 with any l2, plus l1 = 0 with l2 > 0. Ties in
    |l|^2 are broken lexicographically so the ordering is deterministic.
    """
    m = int(np.ceil(np.sqrt(2.0 * n_modes))) + 2
    candidates = []
    for l1 in range(0, m + 1):
        for l2 in range(-m, m + 1):
            if l1 == 0 and l2 <= 0:
                continue
            candidates.append((l1 * l1 + l2 * l2, l1, l2))
    candidates.sort()
    if len(candidates) < n_modes:
        raise ValueError("internal enumeration box too small")
    return np.array([(l1, l2) for _, l1, l2 in candidates[:n_modes]], dtype=float)


class KLField:
    """log a(x; theta) = sum_k theta_k sqrt(lambda_k) cos(pi <l_k, x>).

    Eigenvalues lambda_k = (pi^2 |l_k|^2 + tau^2)^(-alpha), non-increasing in k.
    """

    def __init__(self, n_modes: int, tau: float = 3.0, alpha: float = 2.0):
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        if tau <= 0 or alpha <= 0:
            raise ValueError("tau and alpha must be positive")
        self.n_modes = n_modes
        self.tau = tau
        self.alpha = alpha
        self.indices = _mode_indices(n_modes)
        norms_sq = np.sum(self.indices**2, axis=1)
        self.eigenvalues = (np.pi**2 * norms_sq + tau**2) ** (-alpha)

    def log_field(self, theta: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Evaluate the truncated series at coordinate arrays x1, x2."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_modes,):
            raise ModelError(
                f"expected {self.n_modes} KL coefficients, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ModelError("non-finite KL coefficients")
        phase = np.tensordot(self.indices, np.stack([x1, x2]), axes=(1, 0))
        basis = np.cos(np.pi * phase)
        coeff = theta * np.sqrt(self.eigenvalues)
        return np.tensordot(coeff, basis, axes=(0, 0))

    def sample(self, theta: np.ndarray, n: int) -> np.ndarray:
        """Positive field a = exp(log a) on the (n+1) x (n+1) node grid of [0,1]^2."""
        grid = np.linspace(0.0, 1.0, n + 1)
        x1, x2 = np.meshgrid(grid, grid, indexing="ij")
        return np.exp(self.log_field(theta, x1, x2))
