"""Ensemble Kalman calibration: EKI optimization and the EKS sampler.

The EKS update uses the linearly implicit split-step scheme: a shared p x p
solve for the prior-damped drift, then additive noise drawn from the scaled
ensemble covariance. Snapshots of (particles, forward evaluations) double as
the training design for the emulation stage.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from ces.inverse_problem import GaussianPrior, InverseProblem
from ces.models.base import ModelError
from ces.models.timeavg import TimeAveragedModel

log = logging.getLogger(__name__)

TIMESTEP_EPS = 1e-8
MAX_RESAMPLE_RETRIES = 3


@dataclass
class Ensemble:
    """Particles and their forward evaluations at one iteration."""

    iteration: int
    particles: np.ndarray  # (J, p)
    evaluations: np.ndarray  # (J, d)
    carry: list | None = None  # per-particle dynamical-system endpoints

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, float))
        self.evaluations = np.atleast_2d(np.asarray(self.evaluations, float))
        if self.particles.shape[0] != self.evaluations.shape[0]:
            raise ValueError("particle and evaluation counts differ")
        if not (np.all(np.isfinite(self.particles)) and np.all(np.isfinite(self.evaluations))):
            raise ValueError("non-finite entries in ensemble")

    @property
    def size(self) -> int:
        return self.particles.shape[0]


@dataclass
class EksSettings:
    ensemble_size: int = 100
    step0: float = 1.0
    n_iterations: int = 20
    variant: str = "eks"  # "eks" | "eki"
    snapshot_stride: int = 0  # 0: keep only the final iteration
    cov_jitter: float = 1e-12
    max_step_factor: float = 10.0
    workers: int = 1

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be >= 0")
        if self.variant not in ("eks", "eki"):
            raise ValueError("variant must be 'eks' or 'eki'")


def ensemble_mean(ens: Ensemble):
    if ens.size < 1:
        raise ValueError("empty ensemble")
    return ens.particles.mean(axis=0), ens.evaluations.mean(axis=0)


def ensemble_cov(ens: Ensemble) -> np.ndarray:
    """Population covariance (1/J normalization) of the particles."""
    centered = ens.particles - ens.particles.mean(axis=0)
    return centered.T @ centered / ens.size


def misfit_matrix(ens: Ensemble, y: np.ndarray, noise_chol: np.ndarray) -> np.ndarray:
    """J x J matrix D with D[k, j] = (1/J) <G_k - Gbar, G_j - y> in the noise norm."""
    evals = ens.evaluations
    centered = evals - evals.mean(axis=0)
    residual = evals - np.asarray(y, float)
    weighted = cho_solve((noise_chol, True), residual.T)  # (d, J)
    return centered @ weighted / ens.size


def adaptive_timestep(ens: Ensemble, y, noise_chol, step0: float,
                      max_factor: float = 10.0) -> float:
    """step0 / (||D||_F + eps), capped at max_factor * step0."""
    d_norm = np.linalg.norm(misfit_matrix(ens, y, noise_chol))
    return min(step0 / (d_norm + TIMESTEP_EPS), max_factor * step0)


def eki_step(ens: Ensemble, y, noise_chol, dt: float) -> np.ndarray:
    """Explicit Euler update of the interacting-particle optimization flow."""
    d_mat = misfit_matrix(ens, y, noise_chol)
    centered = ens.particles - ens.particles.mean(axis=0)
    return ens.particles - dt * (d_mat.T @ centered)


def _ensemble_sqrt(cov: np.ndarray, jitter0: float) -> np.ndarray:
    jitter = jitter0
    scale = max(np.mean(np.diag(cov)), 1e-300)
    while jitter <= 1e-6:
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise ModelError("ensemble covariance not factorizable after jitter escalation")


def eks_step(ens: Ensemble, y, noise_chol, prior: GaussianPrior, dt: float,
             rng: np.random.Generator | None = None,
             noise: np.ndarray | None = None,
             cov_jitter: float = 1e-12) -> np.ndarray:
    """Linearly implicit split-step update of the Langevin particle flow.

    Drift: (I + dt C Gamma_theta^-1) theta* = theta - dt sum_k D[k,j] theta_k,
    one shared p x p solve; the prior damping is centered at the prior mean.
    Noise: theta* + sqrt(2 dt C) xi with C the jittered ensemble covariance.
    Pass `noise` (J, p standard normals) for externally managed streams.
    """
    j_size, p = ens.particles.shape
    d_mat = misfit_matrix(ens, y, noise_chol)
    cov = ensemble_cov(ens)

    drift_rhs = ens.particles - dt * (d_mat.T @ ens.particles)
    # damping centered at the prior mean: Gamma^-1 (theta - m) = Gamma^-1 theta - Gamma^-1 m
    drift_rhs = drift_rhs + dt * (cov @ prior.precision_apply(prior.mean))
    lhs = np.eye(p) + dt * cov @ prior.precision_apply(np.eye(p)).T
    proposed = np.linalg.solve(lhs, drift_rhs.T).T

    if noise is None:
        if rng is None:
            raise ValueError("eks_step needs either rng or a noise array")
        noise = rng.standard_normal((j_size, p))
    if np.allclose(cov, 0.0):
        return proposed  # consensus: no spread to diffuse along
    root = _ensemble_sqrt(cov, cov_jitter)
    return proposed + np.sqrt(2.0 * dt) * noise @ root.T


@dataclass
class CalibrationResult:
    snapshots: list[Ensemble]
    dt_sequence: list[float]
    seed: int
    settings: EksSettings

    @property
    def final(self) -> Ensemble:
        return self.snapshots[-1]


def _particle_rng(seed: int, iteration: int, particle: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, iteration, particle)))


def _evaluate_particle(model, theta, state):
    if isinstance(model, TimeAveragedModel):
        g, new_state = model.time_average(theta, state)
        return g, new_state
    return model.evaluate(theta), None


def _evaluate_ensemble(model, particles, states, workers: int):
    """Map of forward evaluations, optionally in parallel (particles are independent)."""
    items = list(zip(particles, states))
    if workers > 1:
        from joblib import Parallel, delayed
        return Parallel(n_jobs=workers)(
            delayed(_evaluate_particle)(model, th, st) for th, st in items)
    return [_evaluate_particle(model, th, st) for th, st in items]


def _initial_states(problem: InverseProblem):
    """Spun-up state at the prior mean, shared by all particles at iteration 0."""
    model = problem.model
    if not isinstance(model, TimeAveragedModel):
        return None
    _, endpoint = model.time_average(problem.prior.mean, model.default_state())
    return endpoint


def run_calibration(problem: InverseProblem, settings: EksSettings,
                    seed: int = 0) -> CalibrationResult:
    """Initialize from the prior and iterate forward evaluation + EKS/EKI steps.

    Snapshots are recorded every `snapshot_stride` iterations (if > 0) and at
    the final iteration. Failed forward evaluations resample the particle from
    the current ensemble Gaussian, with a bounded number of retries.
    """
    prior = problem.prior
    noise_chol = np.linalg.cholesky(problem.noise_cov)

    rng_init = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    particles = prior.sample(rng_init, settings.ensemble_size)

    shared_state = _initial_states(problem)
    states = [shared_state] * particles.shape[0]

    snapshots: list[Ensemble] = []
    dt_sequence: list[float] = []

    ens = None
    for iteration in range(settings.n_iterations + 1):
        if iteration == 0:
            evals, states = _evaluate_with_resampling(
                problem, particles, states, settings, seed, iteration)
            ens = Ensemble(0, particles, evals, states)
        else:
            dt = adaptive_timestep(ens, problem.data, noise_chol, settings.step0,
                                   settings.max_step_factor)
            dt_sequence.append(dt)
            if settings.variant == "eki":
                particles = eki_step(ens, problem.data, noise_chol, dt)
            else:
                noise = np.vstack([
                    _particle_rng(seed, iteration, j).standard_normal(prior.dim)
                    for j in range(ens.size)])
                particles = eks_step(ens, problem.data, noise_chol, prior, dt,
                                     noise=noise, cov_jitter=settings.cov_jitter)
            evals, states = _evaluate_with_resampling(
                problem, particles, states, settings, seed, iteration)
            ens = Ensemble(iteration, particles, evals, states)

        last = iteration == settings.n_iterations
        strided = settings.snapshot_stride > 0 and iteration % settings.snapshot_stride == 0
        if last or strided:
            snapshots.append(ens)

    return CalibrationResult(snapshots, dt_sequence, seed, settings)


def _evaluate_with_resampling(problem, particles, states, settings, seed, iteration):
    """Evaluate all particles; on failure resample the particle and retry."""
    model = problem.model
    particles = np.asarray(particles, float)
    evals = [None] * particles.shape[0]
    new_states = [None] * particles.shape[0]
    for j in range(particles.shape[0]):
        attempts = 0
        while True:
            try:
                evals[j], new_states[j] = _evaluate_particle(model, particles[j], states[j])
                break
            except ModelError as exc:
                attempts += 1
                if attempts > MAX_RESAMPLE_RETRIES:
                    raise ModelError(
                        f"particle {j} failed {attempts} times at iteration {iteration}: {exc}"
                    ) from exc
                log.warning("iteration %d particle %d failed (%s); resampling",
                            iteration, j, exc)
                rng = _particle_rng(seed, iteration, 10_000_000 + j * 10 + attempts)
                mean = particles.mean(axis=0)
                cov = (particles - mean).T @ (particles - mean) / particles.shape[0]
                root = _ensemble_sqrt(cov + 1e-12 * np.eye(cov.shape[0]), 1e-12)
                particles[j] = mean + root @ rng.standard_normal(mean.size)
    return np.array(evals), new_states
