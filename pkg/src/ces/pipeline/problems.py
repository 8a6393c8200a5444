"""Construct inverse problems (model + synthetic data + prior) from a config.

Data generation is fully deterministic given the config: truth parameters,
noise draws, and time-average windows all derive from seeds stored in the
problem block.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ces.inverse_problem import GaussianPrior, InverseProblem
from ces.models.darcy import DarcyModel
from ces.models.kl_field import KLField
from ces.models.linear import LinearModel
from ces.models.lorenz import Lorenz63Model, Lorenz96Model

log = logging.getLogger(__name__)


@dataclass
class ProblemBundle:
    problem: InverseProblem
    truth: np.ndarray | None  # in the model's input coordinates; None if unknown
    extras: dict = field(default_factory=dict)


def build_prior(config: dict) -> GaussianPrior:
    block = config["prior"]
    mean = np.array(block["mean"], float)
    cov = np.diag(block["diag"]) if "diag" in block else np.array(block["cov"], float)
    return GaussianPrior(mean, cov)


def _window_covariance(averages: np.ndarray) -> np.ndarray:
    """Unbiased covariance of window averages, symmetrized and jittered to SPD."""
    d = averages.shape[1]
    if averages.shape[0] < d + 1:
        raise ValueError(
            f"{averages.shape[0]} windows insufficient for a nonsingular {d}-d covariance")
    cov = np.cov(averages, rowvar=False, ddof=1).reshape(d, d)
    cov = 0.5 * (cov + cov.T)
    cov += 1e-8 * max(np.mean(np.diag(cov)), 1e-300) * np.eye(d)
    return cov


def _observation_lattice(nx: int, ny: int) -> np.ndarray:
    xs = np.arange(1, nx + 1) / (nx + 1)
    ys = np.arange(1, ny + 1) / (ny + 1)
    x1, x2 = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


def _build_linear(pb: dict, prior: GaussianPrior) -> ProblemBundle:
    model = LinearModel.random(output_dim=pb["output_dim"], seed=pb["matrix_seed"])
    truth = np.array(pb["truth"], float)
    noise_cov = pb["noise_std"] ** 2 * np.eye(model.output_dim)
    rng = np.random.default_rng(np.random.SeedSequence((pb["data_seed"], 101)))
    y = model.evaluate(truth) + pb["noise_std"] * rng.standard_normal(model.output_dim)
    return ProblemBundle(InverseProblem(model, y, noise_cov, prior), truth)


def _build_darcy(pb: dict, prior: GaussianPrior) -> ProblemBundle:
    obs = _observation_lattice(*pb["obs_grid"])
    field_inv = KLField(pb["n_modes"])
    model = DarcyModel(field_inv, n=pb["grid"], observation_points=obs,
                       noise_std=pb["noise_std"])

    # truth drawn from a higher-resolution expansion than the inversion uses
    field_truth = KLField(pb["truth_modes"])
    rng_truth = np.random.default_rng(
        np.random.SeedSequence((pb["truth_seed"], 201)))
    theta_truth = rng_truth.standard_normal(pb["truth_modes"])
    truth_model = DarcyModel(field_truth, n=pb["grid"], observation_points=obs,
                             noise_std=pb["noise_std"])
    truth_perm = truth_model.permeability(theta_truth)
    truth_pressure = truth_model.solve_from_field(truth_perm)

    rng_data = np.random.default_rng(
        np.random.SeedSequence((pb["data_seed"], 202)))
    y = truth_model.observe(truth_pressure) + \
        pb["noise_std"] * rng_data.standard_normal(obs.shape[0])
    noise_cov = pb["noise_std"] ** 2 * np.eye(obs.shape[0])

    extras = {
        "truth_coefficients": theta_truth,
        "truth_permeability": truth_perm,
        "truth_pressure": truth_pressure,
        "observation_points": obs,
    }
    # the truth lives in a larger coefficient space; its first n_modes entries
    # are the projection the inversion can recover
    truth_proj = theta_truth[:pb["n_modes"]]
    return ProblemBundle(InverseProblem(model, y, noise_cov, prior), truth_proj, extras)


def _build_time_averaged(model, truth: np.ndarray, data_time: float) -> ProblemBundle:
    averages, _ = model.window_averages(truth, data_time)
    noise_cov = _window_covariance(averages)
    y = averages[0]  # one finite-window draw plays the role of the data
    extras = {"n_windows": averages.shape[0], "window_mean": averages.mean(axis=0)}
    return y, noise_cov, extras


def _build_lorenz63(pb: dict, prior: GaussianPrior) -> ProblemBundle:
    model = Lorenz63Model(spinup=pb["spinup"], horizon=pb["horizon"], step=pb["step"])
    truth = np.array(pb["truth"], float)  # (log r, log b)
    y, noise_cov, extras = _build_time_averaged(model, truth, pb["data_time"])
    return ProblemBundle(InverseProblem(model, y, noise_cov, prior), truth, extras)


def _build_lorenz96(pb: dict, prior: GaussianPrior) -> ProblemBundle:
    model = Lorenz96Model(K=pb["slow_count"], L=pb["fast_count"],
                          spinup=pb["spinup"], horizon=pb["horizon"], step=pb["step"])
    truth = np.array(pb["truth"], float)  # (h, F, log c, b)
    y, noise_cov, extras = _build_time_averaged(model, truth, pb["data_time"])
    return ProblemBundle(InverseProblem(model, y, noise_cov, prior), truth, extras)


_BUILDERS = {
    "linear": _build_linear,
    "darcy": _build_darcy,
    "lorenz63": _build_lorenz63,
    "lorenz96": _build_lorenz96,
}


def build_problem(config: dict) -> ProblemBundle:
    prior = build_prior(config)
    pb = config["problem"]
    bundle = _BUILDERS[pb["kind"]](pb, prior)
    log.info("built %s problem: p=%d, d=%d", pb["kind"],
             bundle.problem.model.input_dim, bundle.problem.model.output_dim)
    return bundle
