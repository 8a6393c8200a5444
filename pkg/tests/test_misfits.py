"""Negative log-likelihood variants driving the sampler."""

import numpy as np
import pytest

from ces.emulation.emulator import train_emulator
from ces.emulation.misfits import Misfit
from ces.models.linear import LinearModel


def _trained_emulator(transform_kind="diagonal", seed=0, noise=0.05):
    """Emulator of a smooth 2-in 2-out map on a spread-out design."""
    rng = np.random.default_rng(seed)
    design = rng.uniform(-2, 2, size=(40, 2))
    targets = np.column_stack([
        np.sin(design[:, 0]) + 0.5 * design[:, 1],
        design[:, 0] * design[:, 1],
    ])
    noise_cov = noise**2 * np.eye(2)
    emulator = train_emulator(design, targets, noise_cov,
                              transform_kind=transform_kind,
                              n_restarts=3, seed=seed)
    return emulator, noise_cov


def test_phi_m_zero_at_exactly_predicted_data():
    emulator, _ = _trained_emulator()
    theta = np.array([0.3, -0.8])
    mean, _ = emulator.predict(theta)
    misfit = Misfit("phi_m", data=mean, emulator=emulator)
    assert misfit(theta) == pytest.approx(0.0, abs=1e-16)


def test_phi_m_quadratic_oracle_in_original_coordinates():
    """phi_m equals 0.5 (y - m)^T Gamma^-1 (y - m) computed directly."""
    emulator, noise_cov = _trained_emulator("diagonal")
    theta = np.array([1.1, 0.4])
    y = np.array([0.7, -0.2])
    mean, _ = emulator.predict(theta)
    expected = 0.5 * (y - mean) @ np.linalg.solve(noise_cov, y - mean)
    misfit = Misfit("phi_m", data=y, emulator=emulator)
    assert misfit(theta) == pytest.approx(expected, rel=1e-10)


def test_phi_m_invariant_under_orthogonal_output_rotation():
    """phi_m evaluated in the rotated (noise-diagonalizing) coordinates equals
    the same quadratic form evaluated in the original coordinates, to 1e-10.
    The rotation is orthogonal, so the norm is preserved exactly."""
    rng = np.random.default_rng(3)
    a = rng.standard_normal((2, 2))
    noise_cov = a @ a.T + 2.0 * np.eye(2)  # correlated noise: rotation nontrivial
    design = rng.uniform(-2, 2, size=(40, 2))
    targets = np.column_stack([np.sin(design[:, 0]) + 0.5 * design[:, 1],
                               design[:, 0] * design[:, 1]])
    emulator = train_emulator(design, targets, noise_cov,
                              transform_kind="diagonal", n_restarts=3, seed=3)
    y = np.array([0.4, 0.9])
    misfit = Misfit("phi_m", data=y, emulator=emulator)
    for theta in ([0.0, 0.0], [1.0, -1.0], [-1.5, 0.7]):
        theta = np.array(theta)
        # oracle in the original, unrotated coordinates via the same emulator
        mean = emulator.transform.invert_mean(
            emulator.predict_transformed(theta)[0][0])
        expected = 0.5 * (y - mean) @ np.linalg.solve(noise_cov, y - mean)
        assert misfit(theta) == pytest.approx(expected, abs=1e-10 * max(1.0, expected))


def test_phi_gp_scalar_oracle():
    """Unit standardized residual in each component: phi_gp = d/2 + logdet/2."""
    emulator, _ = _trained_emulator()
    theta = np.array([-0.6, 0.2])
    means, variances = emulator.predict_transformed(theta)
    # choose data whose transformed residual is exactly sqrt(var) per component
    z_target = means[0] + np.sqrt(variances[0])
    data = emulator.transform.invert_mean(z_target)
    misfit = Misfit("phi_gp", data=data, emulator=emulator)
    expected = 0.5 * 2 + 0.5 * np.sum(np.log(variances[0]))
    assert misfit(theta) == pytest.approx(expected, rel=1e-8)


def test_phi_gp_combined_matches_dense_gaussian_oracle():
    emulator, _ = _trained_emulator("svd", seed=5)
    theta = np.array([0.9, -0.3])
    y = np.array([0.1, 0.5])
    means, variances = emulator.predict_transformed(theta)
    z = emulator.transform.apply(y)
    cov = emulator.noise_cov_transformed() + np.diag(variances[0])
    resid = z - means[0]
    expected = (0.5 * resid @ np.linalg.solve(cov, resid)
                + 0.5 * np.linalg.slogdet(cov)[1])
    misfit = Misfit("phi_gp_combined", data=y, emulator=emulator)
    assert misfit(theta) == pytest.approx(expected, rel=1e-10)


def test_phi_gp_combined_at_least_reaches_phi_m_width():
    """Adding predictive variance can only flatten the quadratic part: for data
    far from the mean, phi_gp_combined's quadratic term is below phi_m's."""
    emulator, noise_cov = _trained_emulator()
    theta = np.array([0.0, 0.0])
    mean, _ = emulator.predict(theta)
    y = mean + 50.0 * np.sqrt(np.diag(noise_cov))
    phi_m = Misfit("phi_m", data=y, emulator=emulator)(theta)
    phi_c = Misfit("phi_gp_combined", data=y, emulator=emulator)(theta)
    assert phi_c < phi_m


def test_phi_t_direct_quadratic_oracle():
    model = LinearModel.random(output_dim=6, seed=2)
    noise_cov = 0.04 * np.eye(6)
    theta = np.array([0.5, -1.0])
    y = model.evaluate(theta) + 0.1
    misfit = Misfit("phi_T_direct", data=y, model=model, noise_cov=noise_cov)
    resid = y - model.evaluate(theta)
    expected = 0.5 * resid @ np.linalg.solve(noise_cov, resid)
    assert misfit(theta) == pytest.approx(expected, rel=1e-12)


def test_phi_t_direct_minimized_at_truth_on_grid():
    """On a 1-d slice through the truth, the direct misfit's argmin is the truth."""
    model = LinearModel.random(output_dim=10, seed=4)
    truth = np.array([-1.0, 2.0])
    y = model.evaluate(truth)
    misfit = Misfit("phi_T_direct", data=y, model=model, noise_cov=np.eye(10))
    grid = np.linspace(-3.0, 3.0, 61)
    values = [misfit(np.array([t, 2.0])) for t in grid]
    assert grid[int(np.argmin(values))] == pytest.approx(-1.0)


def test_emulated_argmin_matches_direct_argmin_on_grid():
    """The emulated misfit surface has its grid argmin where the truth lies."""
    emulator, _ = _trained_emulator(seed=7)
    theta_star = np.array([0.5, -0.5])
    y, _ = emulator.predict(theta_star)
    misfit = Misfit("phi_m", data=y, emulator=emulator)
    grid = np.linspace(-1.5, 1.5, 41)
    values = [misfit(np.array([t, -0.5])) for t in grid]
    best = grid[int(np.argmin(values))]
    assert abs(best - 0.5) <= 0.15


def test_misfit_validation():
    with pytest.raises(ValueError):
        Misfit("phi_q", data=np.zeros(2))
    with pytest.raises(ValueError):
        Misfit("phi_m", data=np.zeros(2))  # missing emulator
    with pytest.raises(ValueError):
        Misfit("phi_T_direct", data=np.zeros(2))  # missing model / noise
