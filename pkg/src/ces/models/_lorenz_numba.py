"""Numba-compiled Lorenz time-averaging kernels (hot path).

Mirrors ces.models._lorenz_numpy function-for-function; see that module for
the return conventions.
"""

import numpy as np
from numba import njit

STATE_BOUND = 1e12


@njit(cache=True)
def _l63_rhs(z, sigma, r, b, out):
    out[0] = sigma * (z[1] - z[0])
    out[1] = r * z[0] - z[1] - z[0] * z[2]
    out[2] = z[0] * z[1] - b * z[2]


@njit(cache=True)
def _l63_step(z, sigma, r, b, h):
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    _l63_rhs(z, sigma, r, b, k1)
    _l63_rhs(z + 0.5 * h * k1, sigma, r, b, k2)
    _l63_rhs(z + 0.5 * h * k2, sigma, r, b, k3)
    _l63_rhs(z + h * k3, sigma, r, b, k4)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _l63_accumulate(acc, z, w):
    acc[0] += w * z[0]
    acc[1] += w * z[1]
    acc[2] += w * z[2]
    acc[3] += w * z[0] * z[0]
    acc[4] += w * z[1] * z[1]
    acc[5] += w * z[2] * z[2]
    acc[6] += w * z[0] * z[1]
    acc[7] += w * z[1] * z[2]
    acc[8] += w * z[2] * z[0]


@njit(cache=True)
def _finite3(z):
    for i in range(3):
        if not (np.abs(z[i]) < STATE_BOUND):
            return False
    return True


@njit(cache=True)
def l63_run(sigma, r, b, z0, h, n_spin, n_avg):
    z = z0.copy()
    acc = np.zeros(9)
    for i in range(n_spin):
        z = _l63_step(z, sigma, r, b, h)
        if not _finite3(z):
            return acc, z, i + 1
    _l63_accumulate(acc, z, 0.5)
    for i in range(n_avg):
        z = _l63_step(z, sigma, r, b, h)
        if not _finite3(z):
            return np.zeros(9), z, n_spin + i + 1
        w = 0.5 if i == n_avg - 1 else 1.0
        _l63_accumulate(acc, z, w)
    return acc / n_avg, z, -1


@njit(cache=True)
def _l96_rhs(x, y, h_par, forcing, c, b, K, L, dx, dy):
    KL = K * L
    for k in range(K):
        ybar = 0.0
        for l in range(L):
            ybar += y[k * L + l]
        ybar /= L
        dx[k] = (-x[(k - 1) % K] * (x[(k - 2) % K] - x[(k + 1) % K])
                 - x[k] + forcing - h_par * c * ybar)
    for m in range(KL):
        k = m // L
        dy[m] = c * (-b * y[(m + 1) % KL] * (y[(m + 2) % KL] - y[(m - 1) % KL])
                     - y[m] + (h_par / L) * x[k])


@njit(cache=True)
def _l96_phi(x, y, K, L, acc, w):
    mx = 0.0
    my = 0.0
    mxx = 0.0
    mxy = 0.0
    myy = 0.0
    for k in range(K):
        ybar = 0.0
        for l in range(L):
            ybar += y[k * L + l]
        ybar /= L
        mx += x[k]
        my += ybar
        mxx += x[k] * x[k]
        mxy += x[k] * ybar
        myy += ybar * ybar
    acc[0] += w * mx / K
    acc[1] += w * my / K
    acc[2] += w * mxx / K
    acc[3] += w * mxy / K
    acc[4] += w * myy / K


@njit(cache=True)
def _finite(v):
    for i in range(v.size):
        if not (np.abs(v[i]) < STATE_BOUND):
            return False
    return True


@njit(cache=True)
def _l96_step(x, y, h_par, forcing, c, b, K, L, h):
    KL = K * L
    kx1 = np.empty(K)
    ky1 = np.empty(KL)
    kx2 = np.empty(K)
    ky2 = np.empty(KL)
    kx3 = np.empty(K)
    ky3 = np.empty(KL)
    kx4 = np.empty(K)
    ky4 = np.empty(KL)
    _l96_rhs(x, y, h_par, forcing, c, b, K, L, kx1, ky1)
    _l96_rhs(x + 0.5 * h * kx1, y + 0.5 * h * ky1, h_par, forcing, c, b, K, L, kx2, ky2)
    _l96_rhs(x + 0.5 * h * kx2, y + 0.5 * h * ky2, h_par, forcing, c, b, K, L, kx3, ky3)
    _l96_rhs(x + h * kx3, y + h * ky3, h_par, forcing, c, b, K, L, kx4, ky4)
    return (x + (h / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4),
            y + (h / 6.0) * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4))


@njit(cache=True)
def l96_run(h_par, forcing, c, b, K, L, x0, y0, h, n_spin, n_avg):
    x = x0.copy()
    y = y0.copy()
    acc = np.zeros(5)
    for i in range(n_spin):
        x, y = _l96_step(x, y, h_par, forcing, c, b, K, L, h)
        if not (_finite(x) and _finite(y)):
            return acc, x, y, i + 1
    _l96_phi(x, y, K, L, acc, 0.5)
    for i in range(n_avg):
        x, y = _l96_step(x, y, h_par, forcing, c, b, K, L, h)
        if not (_finite(x) and _finite(y)):
            return np.zeros(5), x, y, n_spin + i + 1
        w = 0.5 if i == n_avg - 1 else 1.0
        _l96_phi(x, y, K, L, acc, w)
    return acc / n_avg, x, y, -1
