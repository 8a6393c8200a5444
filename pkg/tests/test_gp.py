"""Gaussian-process regression: kernels, marginal likelihood, fitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ces.emulation.gp import (
    GpComponent,
    GpFitError,
    fit_gp,
    log_marginal_likelihood,
)
from ces.emulation.kernels import (
    FAMILIES,
    KernelSpec,
    kernel_eval,
    kernel_matrix,
    kernel_matrix_with_grads,
)


# kernels -----------------------------------------------------------------

def test_kernel_at_coincident_points_includes_nugget():
    spec = KernelSpec("squared-exponential", 2.0, np.array([1.0]), 0.3)
    theta = np.array([0.7])
    assert kernel_eval(spec, theta, theta) == pytest.approx(2.3)


def test_kernel_squared_exponential_hand_value():
    """sigma^2 = 1, ell = 2, |dx| = 2: k = exp(-0.5 * (2/2)^2) = exp(-1/2)."""
    spec = KernelSpec("squared-exponential", 1.0, np.array([2.0]), 0.0)
    value = kernel_eval(spec, np.array([0.0]), np.array([2.0]))
    assert value == pytest.approx(np.exp(-0.5))


def test_kernel_matern52_hand_value():
    """r = 1: k = sigma^2 (1 + sqrt5 + 5/3) exp(-sqrt5)."""
    spec = KernelSpec("matern52", 3.0, np.array([1.0]), 0.0)
    value = kernel_eval(spec, np.array([0.0]), np.array([1.0]))
    s5 = np.sqrt(5.0)
    assert value == pytest.approx(3.0 * (1.0 + s5 + 5.0 / 3.0) * np.exp(-s5))


@given(dx=st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_kernel_decays_with_distance(dx):
    for family in FAMILIES:
        spec = KernelSpec(family, 1.5, np.array([1.0]), 0.0)
        near = kernel_eval(spec, np.zeros(1), np.array([dx]))
        far = kernel_eval(spec, np.zeros(1), np.array([dx + 1.0]))
        assert 0.0 < far < near <= 1.5


def test_kernel_anisotropy():
    """Moving along a long-lengthscale axis decays slower than a short one."""
    spec = KernelSpec("squared-exponential", 1.0, np.array([10.0, 0.1]), 0.0)
    along_long = kernel_eval(spec, np.zeros(2), np.array([1.0, 0.0]))
    along_short = kernel_eval(spec, np.zeros(2), np.array([0.0, 1.0]))
    assert along_long > along_short


def test_training_matrix_gradient_shapes():
    spec = KernelSpec("matern52", 1.0, np.array([1.0, 2.0, 3.0]), 0.1)
    x = np.random.default_rng(0).standard_normal((6, 3))
    k, grads = kernel_matrix_with_grads(spec, x)
    assert k.shape == (6, 6)
    assert len(grads) == 5  # amplitude + 3 lengthscales + nugget
    np.testing.assert_array_equal(grads[-1], 0.1 * np.eye(6))


def test_invalid_hyperparameters_rejected():
    with pytest.raises(ValueError):
        KernelSpec("squared-exponential", -1.0, np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        KernelSpec("cubic", 1.0, np.array([1.0]), 0.0)


# marginal likelihood -------------------------------------------------------

def _fd_gradient(spec_builder, phi, x, y, mean_family, priors, h=1e-6):
    grad = np.empty_like(phi)
    for j in range(phi.size):
        up, dn = phi.copy(), phi.copy()
        up[j] += h
        dn[j] -= h
        f_up = log_marginal_likelihood(spec_builder(up), x, y, mean_family, priors)
        f_dn = log_marginal_likelihood(spec_builder(dn), x, y, mean_family, priors)
        grad[j] = (f_up - f_dn) / (2.0 * h)
    return grad


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("mean_family", ["zero", "linear"])
def test_gradient_matches_finite_differences(family, mean_family):
    """Analytic gradient of the profiled marginal likelihood vs central
    differences; required agreement is 1e-5 relative."""
    rng = np.random.default_rng(13)
    x = rng.uniform(-2, 2, size=(12, 2))
    y = np.sin(x[:, 0]) + 0.3 * x[:, 1] + 0.05 * rng.standard_normal(12)

    def build(phi):
        return KernelSpec(family, np.exp(phi[0]), np.exp(phi[1:3]), np.exp(phi[3]))

    phi = np.array([0.2, -0.1, 0.4, -3.0])
    _, grad = log_marginal_likelihood(build(phi), x, y, mean_family, with_grad=True)
    fd = _fd_gradient(build, phi, x, y, mean_family, None)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)


def test_gradient_with_lengthscale_priors():
    from ces.emulation.lengthscale_priors import GammaPrior
    rng = np.random.default_rng(14)
    x = rng.uniform(0, 3, size=(10, 1))
    y = np.cos(x[:, 0])
    priors = [GammaPrior(shape=2.0, scale=0.8)]

    def build(phi):
        return KernelSpec("squared-exponential", np.exp(phi[0]),
                          np.exp(phi[1:2]), np.exp(phi[2]))

    phi = np.array([0.0, -0.3, -4.0])
    _, grad = log_marginal_likelihood(build(phi), x, y, "zero", priors,
                                      with_grad=True)
    fd = _fd_gradient(build, phi, x, y, "zero", priors)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)


def test_marginal_likelihood_iid_limit_oracle():
    """Huge nugget relative to signal: the value approaches the iid Gaussian
    log-likelihood with variance sigma^2 + lambda^2 (zero mean)."""
    x = np.linspace(0, 1, 8)[:, None] * 1e-6  # nearly coincident inputs
    rng = np.random.default_rng(3)
    y = rng.standard_normal(8)
    spec = KernelSpec("squared-exponential", 1e-12, np.array([1.0]), 2.0)
    value = log_marginal_likelihood(spec, x, y)
    var = 2.0 + 1e-12
    expected = -0.5 * np.sum(y**2) / var - 4.0 * np.log(2 * np.pi * var)
    assert value == pytest.approx(expected, rel=1e-6)


# fitting and prediction -----------------------------------------------------

def test_interpolates_noise_free_linear_data():
    """Linear targets with a linear mean: prediction is exact to ~1e-6."""
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, size=(20, 2))
    y = 2.0 + 3.0 * x[:, 0] - x[:, 1]
    comp = fit_gp(x, y, mean_family="linear", n_restarts=4, seed=0)
    x_new = rng.uniform(-1, 1, size=(15, 2))
    mean, _ = comp.predict(x_new)
    expected = 2.0 + 3.0 * x_new[:, 0] - x_new[:, 1]
    np.testing.assert_allclose(mean, expected, atol=1e-6)


def test_recovers_smooth_nonlinear_function():
    rng = np.random.default_rng(6)
    x = rng.uniform(-2, 2, size=(40, 1))
    y = np.sin(2.0 * x[:, 0])
    comp = fit_gp(x, y, mean_family="zero", n_restarts=4, seed=1)
    grid = np.linspace(-1.8, 1.8, 25)[:, None]
    mean, var = comp.predict(grid)
    np.testing.assert_allclose(mean, np.sin(2.0 * grid[:, 0]), atol=2e-2)
    assert np.all(var >= 0.0)


def test_constant_targets_degenerate_path():
    x = np.random.default_rng(7).standard_normal((10, 2))
    comp = fit_gp(x, np.full(10, 3.5), mean_family="linear")
    mean, var = comp.predict(np.zeros((1, 2)))
    assert mean[0] == pytest.approx(3.5, abs=1e-6)
    assert var[0] >= 0.0


def test_permutation_invariance_of_predictor():
    """Reordering training points must not change the GP predictor (at fixed
    hyperparameters) nor the marginal likelihood."""
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 1, size=(15, 1))
    y = np.exp(x[:, 0])
    perm = rng.permutation(15)
    spec = KernelSpec("squared-exponential", 1.0, np.array([0.3]), 1e-6)
    a = GpComponent(spec, "linear", x, y)
    b = GpComponent(spec, "linear", x[perm], y[perm])
    grid = np.linspace(0.1, 0.9, 7)[:, None]
    np.testing.assert_allclose(a.predict(grid)[0], b.predict(grid)[0], atol=1e-8)
    lm_a = log_marginal_likelihood(spec, x, y, "linear")
    lm_b = log_marginal_likelihood(spec, x[perm], y[perm], "linear")
    assert lm_a == pytest.approx(lm_b, rel=1e-10)


@given(arrays(float, (3, 2), elements=st.floats(-5, 5)))
@settings(max_examples=30, deadline=None)
def test_predictive_variance_nonnegative(x_new):
    rng = np.random.default_rng(9)
    x = rng.uniform(-5, 5, size=(12, 2))
    y = x[:, 0] * x[:, 1]
    spec = KernelSpec("matern52", 1.0, np.array([1.0, 1.0]), 1e-4)
    comp = GpComponent(spec, "zero", x, y)
    _, var = comp.predict(x_new)
    assert np.all(var >= 0.0)


def test_variance_grows_away_from_data():
    x = np.linspace(0, 1, 10)[:, None]
    y = np.sin(x[:, 0])
    spec = KernelSpec("squared-exponential", 1.0, np.array([0.2]), 1e-6)
    comp = GpComponent(spec, "zero", x, y)
    _, var_in = comp.predict(np.array([[0.5]]))
    _, var_out = comp.predict(np.array([[5.0]]))
    assert var_out[0] > var_in[0]


def test_insufficient_design_raises():
    with pytest.raises(GpFitError):
        fit_gp(np.zeros((3, 2)), np.zeros(3))


def test_non_finite_targets_raise():
    x = np.random.default_rng(0).standard_normal((8, 1))
    with pytest.raises(GpFitError):
        fit_gp(x, np.full(8, np.nan))


def test_serialization_round_trip_bit_exact():
    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, size=(18, 2))
    y = np.tanh(x[:, 0] + x[:, 1])
    comp = fit_gp(x, y, mean_family="linear", n_restarts=3, seed=2)
    clone = GpComponent.from_dict(comp.to_dict(), x, y)
    grid = rng.uniform(-1, 1, size=(9, 2))
    m0, v0 = comp.predict(grid)
    m1, v1 = clone.predict(grid)
    np.testing.assert_array_equal(m0, m1)
    np.testing.assert_array_equal(v0, v1)
