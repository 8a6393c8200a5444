"""Pure-numpy implementations of the Lorenz time-averaging kernels.

Same RK4 step sequence and trapezoidal accumulation as the numba backend.
Each function returns (window_average, endpoint..., diverged_step) where
diverged_step is -1 on success and the 1-based step index at which the state
left the finite range otherwise.
"""

import numpy as np

STATE_BOUND = 1e12


def _l63_rhs(z, sigma, r, b):
    x1, x2, x3 = z
    return np.array([
        sigma * (x2 - x1),
        r * x1 - x2 - x1 * x3,
        x1 * x2 - b * x3,
    ])


def _l63_phi(z):
    x1, x2, x3 = z
    return np.array([x1, x2, x3, x1 * x1, x2 * x2, x3 * x3,
                     x1 * x2, x2 * x3, x3 * x1])


def l63_run(sigma, r, b, z0, h, n_spin, n_avg):
    z = np.asarray(z0, float).copy()

    def step(z):
        k1 = _l63_rhs(z, sigma, r, b)
        k2 = _l63_rhs(z + 0.5 * h * k1, sigma, r, b)
        k3 = _l63_rhs(z + 0.5 * h * k2, sigma, r, b)
        k4 = _l63_rhs(z + h * k3, sigma, r, b)
        return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    for i in range(n_spin):
        z = step(z)
        if not np.all(np.abs(z) < STATE_BOUND):
            return np.zeros(9), z, i + 1
    acc = 0.5 * _l63_phi(z)
    for i in range(n_avg):
        z = step(z)
        if not np.all(np.abs(z) < STATE_BOUND):
            return np.zeros(9), z, n_spin + i + 1
        w = 0.5 if i == n_avg - 1 else 1.0
        acc += w * _l63_phi(z)
    return acc / n_avg, z, -1


def _l96_rhs(x, y, h_par, forcing, c, b, K, L):
    ybar = y.reshape(K, L).mean(axis=1)
    dx = -np.roll(x, 1) * (np.roll(x, 2) - np.roll(x, -1)) - x + forcing - h_par * c * ybar
    dy = c * (-b * np.roll(y, -1) * (np.roll(y, -2) - np.roll(y, 1))
              - y + (h_par / L) * np.repeat(x, L))
    return dx, dy


def _l96_phi(x, y, K, L):
    ybar = y.reshape(K, L).mean(axis=1)
    return np.array([
        x.mean(),
        ybar.mean(),
        (x * x).mean(),
        (x * ybar).mean(),
        (ybar * ybar).mean(),
    ])


def l96_run(h_par, forcing, c, b, K, L, x0, y0, h, n_spin, n_avg):
    x = np.asarray(x0, float).copy()
    y = np.asarray(y0, float).copy()

    def step(x, y):
        kx1, ky1 = _l96_rhs(x, y, h_par, forcing, c, b, K, L)
        kx2, ky2 = _l96_rhs(x + 0.5 * h * kx1, y + 0.5 * h * ky1, h_par, forcing, c, b, K, L)
        kx3, ky3 = _l96_rhs(x + 0.5 * h * kx2, y + 0.5 * h * ky2, h_par, forcing, c, b, K, L)
        kx4, ky4 = _l96_rhs(x + h * kx3, y + h * ky3, h_par, forcing, c, b, K, L)
        return (x + (h / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4),
                y + (h / 6.0) * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4))

    def finite(x, y):
        return np.all(np.abs(x) < STATE_BOUND) and np.all(np.abs(y) < STATE_BOUND)

    for i in range(n_spin):
        x, y = step(x, y)
        if not finite(x, y):
            return np.zeros(5), x, y, i + 1
    acc = 0.5 * _l96_phi(x, y, K, L)
    for i in range(n_avg):
        x, y = step(x, y)
        if not finite(x, y):
            return np.zeros(5), x, y, n_spin + i + 1
        w = 0.5 if i == n_avg - 1 else 1.0
        acc += w * _l96_phi(x, y, K, L)
    return acc / n_avg, x, y, -1
