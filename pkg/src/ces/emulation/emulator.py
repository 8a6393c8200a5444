"""Multi-output emulator: independent per-output GPs on decorrelated targets.

Training uses the calibration ensemble as the design. Predictions are
returned both in the decorrelated coordinates (used by the misfit functions)
and mapped back to the original observation coordinates.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from ces.emulation.gp import GpComponent, GpFitError, fit_gp
from ces.emulation.lengthscale_priors import elicit_lengthscale_priors
from ces.emulation.transforms import OutputTransform, build_transform

log = logging.getLogger(__name__)


@dataclass
class GpEmulator:
    """Per-output GPs plus the output transform they were trained under."""

    transform: OutputTransform
    components: list[GpComponent]
    design: np.ndarray  # (M, p) training parameters
    targets: np.ndarray  # (M, d) training outputs, original coordinates
    noise_cov: np.ndarray  # (d, d) observational noise, original coordinates

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, float))
        self.targets = np.atleast_2d(np.asarray(self.targets, float))
        self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, float))

    @property
    def input_dim(self) -> int:
        return self.design.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def noise_cov_transformed(self) -> np.ndarray:
        return self.transform.apply_cov(self.noise_cov)

    def predict_transformed(self, thetas: np.ndarray):
        """Means and variances in the decorrelated coordinates, shapes (n, d)."""
        thetas = np.atleast_2d(np.asarray(thetas, float))
        n = thetas.shape[0]
        d = len(self.components)
        means = np.empty((n, d))
        variances = np.empty((n, d))
        for i, comp in enumerate(self.components):
            means[:, i], variances[:, i] = comp.predict(thetas)
        return means, variances

    def predict(self, theta: np.ndarray):
        """Predictive mean and covariance in the original observation coordinates."""
        means, variances = self.predict_transformed(theta)
        mean = self.transform.invert_mean(means[0])
        cov = self.transform.invert_cov(np.diag(variances[0]))
        return mean, cov

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "transform": self.transform.to_dict(),
            "components": [c.to_dict() for c in self.components],
            "design": self.design.tolist(),
            "targets": self.targets.tolist(),
            "noise_cov": self.noise_cov.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GpEmulator":
        transform = OutputTransform.from_dict(payload["transform"])
        design = np.array(payload["design"])
        targets = np.array(payload["targets"])
        z = transform.apply(targets)
        components = [
            GpComponent.from_dict(comp, design, z[:, i])
            for i, comp in enumerate(payload["components"])]
        return cls(transform, components, design, targets,
                   np.array(payload["noise_cov"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GpEmulator":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_emulator(design: np.ndarray, targets: np.ndarray, noise_cov: np.ndarray,
                   kernel_family: str = "squared-exponential",
                   mean_family: str = "linear",
                   transform_kind: str = "diagonal",
                   use_lengthscale_priors: bool = True,
                   prior_design: np.ndarray | None = None,
                   n_restarts: int = 8, seed: int = 0) -> GpEmulator:
    """Fit the output transform and one GP per decorrelated output.

    `prior_design` selects the points whose pairwise distances elicit the
    lengthscale priors (e.g. only the final, concentrated ensemble iteration
    when the training design spans many iterations); defaults to the design.
    """
    design = np.atleast_2d(np.asarray(design, float))
    targets = np.atleast_2d(np.asarray(targets, float))
    if design.shape[0] != targets.shape[0]:
        raise ValueError("design and target row counts differ")

    transform = build_transform(transform_kind, targets, noise_cov)
    z = transform.apply(targets)
    prior_points = design if prior_design is None else np.atleast_2d(prior_design)
    priors = elicit_lengthscale_priors(prior_points) if use_lengthscale_priors else None

    components = []
    for i in range(z.shape[1]):
        try:
            comp = fit_gp(design, z[:, i], mean_family=mean_family,
                          kernel_family=kernel_family, lengthscale_priors=priors,
                          n_restarts=n_restarts, seed=seed + i)
        except GpFitError as exc:
            raise GpFitError(f"output component {i}: {exc}") from exc
        log.debug("output %d: amplitude %.3g nugget %.3g", i,
                  comp.spec.amplitude, comp.spec.noise_variance)
        components.append(comp)
    return GpEmulator(transform, components, design, targets,
                      np.asarray(noise_cov, float))
