"""Time-averaged observation operators for ODE forward models.

The forward map integrates dz/dt = F(z; theta) with explicit RK4, discards a
spinup window and returns the trapezoidal time-average of an observable along
the remainder of the trajectory. Finite-window averages are treated as noisy
evaluations of the infinite-time average; the long-run window estimator below
provides the corresponding noise covariance.
"""

import numpy as np

from ces.models.base import DivergenceError, ForwardModel, ModelError

STATE_BOUND = 1e12


def trapezoid_average(values: np.ndarray) -> np.ndarray:
    """Trapezoidal mean of rows sampled on a uniform grid (endpoints half-weighted)."""
    values = np.asarray(values, float)
    if values.shape[0] < 2:
        raise ValueError("need at least two samples")
    acc = values[1:-1].sum(axis=0) + 0.5 * (values[0] + values[-1])
    return acc / (values.shape[0] - 1)


def _steps(duration: float, h: float) -> int:
    n = int(round(duration / h))
    if abs(n * h - duration) > 1e-9 * max(1.0, abs(duration)):
        raise ValueError(f"duration {duration} is not a multiple of the step {h}")
    return n


class TimeAveragedModel(ForwardModel):
    """G_T(theta; z0) = (1/T) integral of phi(z(t)) over (T0, T0+T].

    `rhs(z, theta)` and `observable(z)` are plain callables; subclasses with
    compiled kernels override `_run`. Evaluation carries the trajectory
    endpoint so ensemble iterations can reuse it as the next initial
    condition.
    """

    def __init__(self, rhs, observable, state_dim: int, obs_dim: int,
                 input_dim: int, spinup: float, horizon: float, step: float):
        if horizon <= 0 or spinup < 0:
            raise ValueError("spinup must be >= 0 and horizon > 0")
        if step <= 0:
            raise ValueError("step must be positive")
        self.rhs = rhs
        self.observable = observable
        self.state_dim = state_dim
        self.output_dim = obs_dim
        self.input_dim = input_dim
        self.spinup = float(spinup)
        self.horizon = float(horizon)
        self.step = float(step)

    # -- integration ------------------------------------------------------

    def _rk4_step(self, z: np.ndarray, theta: np.ndarray, h: float) -> np.ndarray:
        k1 = self.rhs(z, theta)
        k2 = self.rhs(z + 0.5 * h * k1, theta)
        k3 = self.rhs(z + 0.5 * h * k2, theta)
        k4 = self.rhs(z + h * k3, theta)
        return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def integrate(self, theta, z0, duration: float) -> np.ndarray:
        """RK4 trajectory, shape (n_steps + 1, state_dim)."""
        theta = np.asarray(theta, float)
        z = np.asarray(z0, float)
        if z.shape != (self.state_dim,) or not np.all(np.isfinite(z)):
            raise ModelError("initial condition must be a finite state vector")
        n = _steps(duration, self.step)
        traj = np.empty((n + 1, self.state_dim))
        traj[0] = z
        for i in range(n):
            z = self._rk4_step(z, theta, self.step)
            if not np.all(np.abs(z) < STATE_BOUND):
                raise DivergenceError((i + 1) * self.step)
            traj[i + 1] = z
        return traj

    def _run(self, theta: np.ndarray, z0: np.ndarray, n_spin: int, n_avg: int):
        """(time-average of observable, trajectory endpoint)."""
        z = np.asarray(z0, float)
        for i in range(n_spin):
            z = self._rk4_step(z, theta, self.step)
            if not np.all(np.abs(z) < STATE_BOUND):
                raise DivergenceError((i + 1) * self.step)
        acc = 0.5 * np.asarray(self.observable(z), float)
        for i in range(n_avg):
            z = self._rk4_step(z, theta, self.step)
            if not np.all(np.abs(z) < STATE_BOUND):
                raise DivergenceError(self.spinup + (i + 1) * self.step)
            w = 0.5 if i == n_avg - 1 else 1.0
            acc = acc + w * np.asarray(self.observable(z), float)
        return acc / n_avg, z

    # -- public operations --------------------------------------------------

    def time_average(self, theta, z0):
        """Finite-window average and the trajectory endpoint."""
        theta = self._check_theta(np.asarray(theta, float))
        z0 = np.asarray(z0, float)
        if z0.shape != (self.state_dim,) or not np.all(np.isfinite(z0)):
            raise ModelError("initial condition must be a finite state vector")
        return self._run(theta, z0, _steps(self.spinup, self.step), _steps(self.horizon, self.step))

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        avg, self._carry = self.time_average(theta, self.initial_state(theta))
        return avg

    def initial_state(self, theta) -> np.ndarray:
        """Default start: carried endpoint if present, else a deterministic state."""
        carry = getattr(self, "_carry", None)
        if carry is not None:
            return carry
        return self.default_state()

    def default_state(self) -> np.ndarray:
        return np.full(self.state_dim, 1.0)

    def estimate_obs_covariance(self, theta, total_time: float, z0=None):
        """Mean and regularized covariance of per-window averages.

        One long trajectory of length `total_time` is split (after the spinup)
        into floor((total_time - spinup) / horizon) windows of length
        `horizon`; the sample mean and unbiased covariance of the window
        averages are returned, with the covariance symmetrized and
        jitter-regularized to SPD.
        """
        averages, _ = self.window_averages(theta, total_time, z0)
        if averages.shape[0] < self.output_dim + 1:
            raise ModelError(
                f"{averages.shape[0]} windows insufficient for a nonsingular "
                f"{self.output_dim}-d covariance"
            )
        mean = averages.mean(axis=0)
        cov = np.cov(averages, rowvar=False, ddof=1).reshape(self.output_dim, self.output_dim)
        cov = 0.5 * (cov + cov.T)
        jitter = 1e-8 * max(np.mean(np.diag(cov)), 1e-300)
        cov += jitter * np.eye(self.output_dim)
        return mean, cov

    def window_averages(self, theta, total_time: float, z0=None):
        """Consecutive window averages of one long run, after discarding spinup.

        Returns (averages with shape (n_windows, d), trajectory endpoint).
        """
        theta = self._check_theta(np.asarray(theta, float))
        n_windows = int(np.floor((total_time - self.spinup) / self.horizon))
        if n_windows < 1:
            raise ModelError("total_time leaves no complete averaging window")
        z = np.asarray(z0, float) if z0 is not None else self.default_state()
        averages = np.empty((n_windows, self.output_dim))
        for w in range(n_windows):
            if w == 0:
                averages[w], z = self.time_average(theta, z)
            else:
                averages[w], z = self._window_average(theta, z)
        return averages, z

    def _window_average(self, theta, z):
        return self._run(theta, np.asarray(z, float), 0, _steps(self.horizon, self.step))
