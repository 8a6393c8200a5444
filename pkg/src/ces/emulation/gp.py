"""Single-output Gaussian-process regression with empirical-Bayes fitting.

Hyperparameters (amplitude, per-dimension lengthscales, nugget) maximize the
log marginal likelihood plus optional Gamma log-priors on the lengthscales,
over log-hyperparameters with analytic gradients and multi-start L-BFGS.
Linear mean coefficients are profiled out by generalized least squares.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from ces.emulation.kernels import KernelSpec, kernel_matrix, kernel_matrix_with_grads

log = logging.getLogger(__name__)

MEAN_FAMILIES = ("zero", "linear")
JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
VAR_FLOOR_FACTOR = 1e-12


class GpFitError(Exception):
    pass


def _mean_basis(mean_family: str, x: np.ndarray) -> np.ndarray | None:
    if mean_family == "zero":
        return None
    return np.column_stack([np.ones(x.shape[0]), x])


def _chol_with_jitter(k: np.ndarray):
    scale = max(np.mean(np.diag(k)), 1e-300)
    for jit in JITTER_LADDER:
        try:
            c, lower = cho_factor(k + jit * scale * np.eye(k.shape[0]), lower=True)
            return np.tril(c), jit
        except np.linalg.LinAlgError:
            continue
    raise GpFitError("kernel matrix not factorizable after jitter escalation")


def _profile_fit(k_chol: np.ndarray, h: np.ndarray | None, y: np.ndarray):
    """GLS mean coefficients and the residual weights alpha = K^-1 (y - H beta)."""
    if h is None:
        alpha = cho_solve((k_chol, True), y)
        return np.zeros(0), alpha, y
    kinv_h = cho_solve((k_chol, True), h)
    gram = h.T @ kinv_h
    beta = np.linalg.solve(gram, kinv_h.T @ y)
    resid = y - h @ beta
    alpha = cho_solve((k_chol, True), resid)
    return beta, alpha, resid


def log_marginal_likelihood(spec: KernelSpec, x: np.ndarray, y: np.ndarray,
                            mean_family: str = "zero",
                            lengthscale_priors=None,
                            with_grad: bool = False):
    """Profiled log marginal likelihood (plus lengthscale log-priors).

    With `with_grad`, also returns the gradient with respect to
    (log amplitude, log lengthscales..., log nugget).
    """
    x = np.atleast_2d(x)
    y = np.asarray(y, float)
    n = x.shape[0]
    h = _mean_basis(mean_family, x)
    k, grads = kernel_matrix_with_grads(spec, x)
    k_chol, _ = _chol_with_jitter(k)
    _, alpha, resid = _profile_fit(k_chol, h, y)
    logdet = 2.0 * np.sum(np.log(np.diag(k_chol)))
    value = -0.5 * float(resid @ alpha) - 0.5 * logdet - 0.5 * n * np.log(2.0 * np.pi)

    if lengthscale_priors is not None:
        for ell, prior in zip(spec.lengthscales, lengthscale_priors):
            if prior is not None:
                value += prior.log_pdf(ell)
    if not with_grad:
        return value

    kinv = cho_solve((k_chol, True), np.eye(n))
    grad = np.empty(len(grads))
    for j, kj in enumerate(grads):
        # tr(K^-1 Kj) = sum(K^-1 * Kj) elementwise since both are symmetric
        grad[j] = 0.5 * (alpha @ (kj @ alpha)) - 0.5 * np.sum(kinv * kj)
    if lengthscale_priors is not None:
        for i, (ell, prior) in enumerate(zip(spec.lengthscales, lengthscale_priors)):
            if prior is not None:
                grad[1 + i] += prior.dlog_pdf_dlog(ell)
    return value, grad


@dataclass
class GpComponent:
    """A fitted per-output GP with cached factorization."""

    spec: KernelSpec
    mean_family: str
    x: np.ndarray
    y: np.ndarray
    beta: np.ndarray = field(default=None)
    _chol: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mean_family not in MEAN_FAMILIES:
            raise ValueError(f"unknown mean family {self.mean_family!r}")
        self.x = np.atleast_2d(np.asarray(self.x, float))
        self.y = np.asarray(self.y, float)
        if self._chol is None:
            self._refit_weights()

    def _refit_weights(self):
        k, _ = kernel_matrix_with_grads(self.spec, self.x)
        self._chol, _ = _chol_with_jitter(k)
        h = _mean_basis(self.mean_family, self.x)
        self.beta, self._alpha, _ = _profile_fit(self._chol, h, self.y)

    def predict(self, x_new: np.ndarray):
        """Predictive mean and variance (noisy-evaluation variance, nugget included)."""
        x_new = np.atleast_2d(np.asarray(x_new, float))
        k_star = kernel_matrix(self.spec, self.x, x_new)  # (M, n*)
        mean = k_star.T @ self._alpha
        h_new = _mean_basis(self.mean_family, x_new)
        if h_new is not None:
            mean = mean + h_new @ self.beta
        v = solve_triangular(self._chol, k_star, lower=True)
        prior_var = self.spec.amplitude + self.spec.noise_variance
        var = prior_var - np.einsum("ij,ij->j", v, v)
        floor = VAR_FLOOR_FACTOR * prior_var
        return mean, np.maximum(var, floor)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kernel_family": self.spec.family,
            "amplitude": self.spec.amplitude,
            "lengthscales": list(map(float, self.spec.lengthscales)),
            "noise_variance": self.spec.noise_variance,
            "mean_family": self.mean_family,
            "beta": list(map(float, np.atleast_1d(self.beta))),
        }

    @classmethod
    def from_dict(cls, payload: dict, x: np.ndarray, y: np.ndarray) -> "GpComponent":
        spec = KernelSpec(payload["kernel_family"], payload["amplitude"],
                          np.array(payload["lengthscales"]), payload["noise_variance"])
        return cls(spec, payload["mean_family"], x, y)


def _pairwise_stats(x):
    """(median, min positive, max) pairwise |dx| per input dimension."""
    p = x.shape[1]
    med, lo, hi = np.empty(p), np.empty(p), np.empty(p)
    for i in range(p):
        d = np.abs(x[:, None, i] - x[None, :, i])
        pos = d[d > 0]
        if pos.size:
            med[i], lo[i], hi[i] = np.median(pos), pos.min(), pos.max()
        else:
            med[i], lo[i], hi[i] = 1.0, 1e-3, 1e3
    return med, lo, hi


def _start_points(x, y, mean_family, n_restarts, rng, lengthscale_priors, med):
    n, p = x.shape
    if mean_family == "linear":
        h = _mean_basis("linear", x)
        coef, *_ = np.linalg.lstsq(h, y, rcond=None)
        resid_var = np.var(y - h @ coef)
    else:
        resid_var = np.var(y)
    resid_var = max(resid_var, 1e-12)

    starts = []
    for s in range(n_restarts):
        log_amp = np.log(resid_var) + (0.0 if s == 0 else rng.normal(0, 1.0))
        log_ell = np.log(med) + (0.0 if s == 0 else rng.normal(0, 0.7, size=p))
        if lengthscale_priors is not None and s % 2 == 1:
            log_ell = np.array([
                np.log(pr.mean()) if pr is not None else le
                for pr, le in zip(lengthscale_priors, np.exp(log_ell))])
        log_nug = np.log(resid_var) + (np.log(1e-4) if s == 0 else rng.normal(np.log(1e-3), 2.0))
        starts.append(np.concatenate([[log_amp], log_ell, [log_nug]]))
    return starts


def fit_gp(inputs: np.ndarray, targets: np.ndarray, mean_family: str = "zero",
           kernel_family: str = "squared-exponential",
           lengthscale_priors=None, n_restarts: int = 8, seed: int = 0,
           maxiter: int = 200) -> GpComponent:
    """Empirical-Bayes fit: multi-start quasi-Newton on log-hyperparameters."""
    x = np.atleast_2d(np.asarray(inputs, float))
    y = np.asarray(targets, float)
    n, p = x.shape
    if n < p + 2:
        raise GpFitError(f"insufficient design: {n} points for {p} input dimensions")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise GpFitError("non-finite training data")
    if np.allclose(y, y[0]):
        # degenerate constant target: no signal to fit
        spec = KernelSpec(kernel_family, 1e-12, np.ones(p), 1e-12)
        return GpComponent(spec, mean_family, x, y)

    rng = np.random.default_rng(seed)

    def unpack(phi):
        # clamp so exp never under/overflows to 0 or inf
        phi = np.clip(phi, -600.0, 600.0)
        return KernelSpec(kernel_family, float(np.exp(phi[0])),
                          np.exp(phi[1:1 + p]), float(np.exp(phi[1 + p])))

    def objective(phi):
        try:
            value, grad = log_marginal_likelihood(
                unpack(phi), x, y, mean_family, lengthscale_priors, with_grad=True)
        except (GpFitError, FloatingPointError, ValueError):
            return 1e20, np.zeros_like(phi)
        return -value, -grad

    scale = np.log(max(np.var(y), 1e-12))
    med, lo, hi = _pairwise_stats(x)
    # lengthscales far below the design resolution or far beyond its span are
    # meaningless; box them so the optimizer cannot run off to degeneracy
    ell_bounds = [(np.log(lo[i] / 100.0), np.log(hi[i] * 100.0)) for i in range(p)]
    bounds = ([(scale - 20.0, scale + 10.0)]
              + ell_bounds
              + [(scale - 25.0, scale + 5.0)])

    best = None
    failures = []
    for phi0 in _start_points(x, y, mean_family, n_restarts, rng,
                              lengthscale_priors, med):
        res = minimize(objective, phi0, jac=True, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": maxiter})
        if not np.isfinite(res.fun):
            failures.append(res.message)
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise GpFitError(f"all optimizer restarts failed: {failures}")
    return GpComponent(unpack(best.x), mean_family, x, y)
