"""Negative log-likelihood functionals used by the sampler.

Four variants:
- "phi_m":           0.5 ||y - m(theta)||^2 weighted by the observational
                     noise, using the GP predictive mean only.
- "phi_gp":          Gaussian-process likelihood with the theta-dependent
                     predictive covariance, including its log determinant.
- "phi_gp_combined": same, with the observational noise added to the
                     predictive covariance.
- "phi_T_direct":    0.5 ||y - G(theta)||^2 against the actual forward model
                     (stochastic when the model is).

Emulator-based variants are evaluated in the decorrelated output coordinates
the GPs were trained in; the weighting matrices are transformed consistently,
so "phi_m" agrees with the original-coordinate misfit up to roundoff.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

KINDS = ("phi_m", "phi_gp", "phi_gp_combined", "phi_T_direct")


@dataclass
class Misfit:
    """Callable negative log-likelihood of a parameter vector."""

    kind: str
    data: np.ndarray
    emulator: object = None  # GpEmulator, for emulator-based kinds
    model: object = None  # ForwardModel, for "phi_T_direct"
    noise_cov: np.ndarray = None  # original coordinates, for "phi_T_direct"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown misfit kind {self.kind!r}")
        self.data = np.atleast_1d(np.asarray(self.data, float))
        if self.kind == "phi_T_direct":
            if self.model is None or self.noise_cov is None:
                raise ValueError("'phi_T_direct' needs a model and noise covariance")
            self._noise_chol = cho_factor(np.atleast_2d(self.noise_cov), lower=True)
        else:
            if self.emulator is None:
                raise ValueError(f"{self.kind!r} misfit needs an emulator")
            self._z_data = self.emulator.transform.apply(self.data)
            noise_t = self.emulator.noise_cov_transformed()
            self._noise_t = noise_t
            self._noise_t_chol = cho_factor(noise_t, lower=True)

    def __call__(self, theta: np.ndarray) -> float:
        return misfit_eval(self, theta)


def _gaussian_quadratic(resid: np.ndarray, chol) -> float:
    w = cho_solve(chol, resid)
    return 0.5 * float(resid @ w)


def misfit_eval(misfit: Misfit, theta: np.ndarray) -> float:
    theta = np.atleast_1d(np.asarray(theta, float))

    if misfit.kind == "phi_T_direct":
        g = misfit.model.evaluate(theta)
        return _gaussian_quadratic(misfit.data - g, misfit._noise_chol)

    means, variances = misfit.emulator.predict_transformed(theta)
    resid = misfit._z_data - means[0]

    if misfit.kind == "phi_m":
        return _gaussian_quadratic(resid, misfit._noise_t_chol)

    if misfit.kind == "phi_gp":
        var = variances[0]
        return float(0.5 * np.sum(resid * resid / var) + 0.5 * np.sum(np.log(var)))

    # "phi_gp_combined": predictive covariance plus observational noise
    cov = misfit._noise_t + np.diag(variances[0])
    chol = cho_factor(cov, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return _gaussian_quadratic(resid, chol) + 0.5 * float(logdet)
