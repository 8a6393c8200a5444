"""Lorenz '63 and multiscale Lorenz '96 models with time-averaged observables.

The time-averaging loops dispatch to the compiled kernels selected in
ces.backends; the generic trajectory path (`integrate`) keeps the plain
python right-hand sides.
"""

import numpy as np

from ces.backends import active_backend
from ces.models.base import DivergenceError, ModelError
from ces.models.timeavg import TimeAveragedModel
from ces.models import _lorenz_numpy

if active_backend() == "numba":
    from ces.models import _lorenz_numba as _kernels
else:
    _kernels = _lorenz_numpy


class Lorenz63Model(TimeAveragedModel):
    """Lorenz '63 with first/second-moment observables of the state.

    The unknown parameters are (r, b); sigma stays fixed. With
    `log_params=True` (the default) the model input is (log r, log b), so a
    Gaussian prior acts on the logarithms and positivity is automatic.
    """

    def __init__(self, sigma: float = 10.0, spinup: float = 30.0,
                 horizon: float = 10.0, step: float = 0.01,
                 log_params: bool = True):
        self.sigma = float(sigma)
        self.log_params = bool(log_params)

        def rhs(z, theta):
            r, b = self._physical(theta)
            return _lorenz_numpy._l63_rhs(z, self.sigma, r, b)

        super().__init__(rhs, _lorenz_numpy._l63_phi, state_dim=3, obs_dim=9,
                         input_dim=2, spinup=spinup, horizon=horizon, step=step)

    def _physical(self, theta):
        if self.log_params:
            with np.errstate(over="raise"):
                try:
                    r, b = np.exp(np.asarray(theta, float))
                except FloatingPointError:
                    raise ModelError("parameter exponentiation overflowed")
        else:
            r, b = np.asarray(theta, float)
        return float(r), float(b)

    def _run(self, theta, z0, n_spin, n_avg):
        r, b = self._physical(theta)
        avg, z_end, bad = _kernels.l63_run(self.sigma, r, b,
                                           np.ascontiguousarray(z0, float),
                                           self.step, n_spin, n_avg)
        if bad >= 0:
            raise DivergenceError(bad * self.step)
        return avg, z_end

    def default_state(self) -> np.ndarray:
        return np.array([1.0, 1.0, 1.0])


class Lorenz96Model(TimeAveragedModel):
    """Multiscale Lorenz '96: K slow variables, each coupled to L fast ones.

    Parameters theta = (h, F, log c, b); the scale separation c enters only
    through exp(log c) > 0. The state is flattened as [X (K), Y (K*L)] with
    Y in the chained periodic order Y[k*L + l], so Y_{l+L,k} = Y_{l,k+1}
    holds by flat index arithmetic. The observable averages
    (X_k, Ybar_k, X_k^2, X_k Ybar_k, Ybar_k^2) over k.
    """

    def __init__(self, K: int = 36, L: int = 10, spinup: float = 20.0,
                 horizon: float = 100.0, step: float = 0.005):
        self.K = int(K)
        self.L = int(L)
        if self.K < 4 or self.L < 4:
            raise ValueError("need K >= 4 and L >= 4 for the cyclic stencils")

        def rhs(z, theta):
            h_par, forcing, c, b = self._physical(theta)
            x, y = z[:self.K], z[self.K:]
            dx, dy = _lorenz_numpy._l96_rhs(x, y, h_par, forcing, c, b, self.K, self.L)
            return np.concatenate([dx, dy])

        def observable(z):
            return _lorenz_numpy._l96_phi(z[:self.K], z[self.K:], self.K, self.L)

        super().__init__(rhs, observable, state_dim=self.K * (1 + self.L),
                         obs_dim=5, input_dim=4,
                         spinup=spinup, horizon=horizon, step=step)

    def _physical(self, theta):
        theta = np.asarray(theta, float)
        h_par, forcing, log_c, b = theta
        with np.errstate(over="raise"):
            try:
                c = float(np.exp(log_c))
            except FloatingPointError:
                raise ModelError("exp(log c) overflowed")
        return float(h_par), float(forcing), c, float(b)

    def _run(self, theta, z0, n_spin, n_avg):
        h_par, forcing, c, b = self._physical(theta)
        x0 = np.ascontiguousarray(z0[:self.K], float)
        y0 = np.ascontiguousarray(z0[self.K:], float)
        avg, x_end, y_end, bad = _kernels.l96_run(
            h_par, forcing, c, b, self.K, self.L, x0, y0,
            self.step, n_spin, n_avg)
        if bad >= 0:
            raise DivergenceError(bad * self.step)
        return avg, np.concatenate([x_end, y_end])

    def default_state(self) -> np.ndarray:
        # deterministic symmetry-breaking start
        k = np.arange(self.K)
        m = np.arange(self.K * self.L)
        x = 1.0 + np.sin(2.0 * np.pi * k / self.K)
        y = 0.1 * np.sin(2.0 * np.pi * m / (self.K * self.L))
        return np.concatenate([x, y])
