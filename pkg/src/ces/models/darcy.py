"""Darcy flow: pressure from log-normal permeability, observed pointwise.

Discretization is 5-point finite differences on a uniform n x n cell grid of
[0,1]^2 with harmonic averaging of the permeability at cell faces and
homogeneous Dirichlet pressure on the boundary. The sparse system is solved
by preconditioned conjugate gradients.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ces.models.base import ForwardModel, ModelError
from ces.models.kl_field import KLField

CG_TOL = 1e-10


def lattice_observation_points(d: int = 50) -> np.ndarray:
    """Interior uniform lattice of d observation points (most-square factor pair)."""
    ny = int(np.sqrt(d))
    while d % ny != 0:
        ny -= 1
    nx = d // ny
    xs = np.arange(1, nx + 1) / (nx + 1)
    ys = np.arange(1, ny + 1) / (ny + 1)
    x1, x2 = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


def random_observation_points(d: int, seed: int, margin: float = 0.1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return margin + (1 - 2 * margin) * rng.random((d, 2))


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


class DarcyModel(ForwardModel):
    def __init__(
        self,
        field: KLField,
        n: int = 64,
        observation_points: np.ndarray | None = None,
        source=1.0,
        noise_std: float = 0.005,
    ):
        self.field = field
        self.n = int(n)
        if self.n < 4:
            raise ValueError("grid resolution too coarse")
        pts = lattice_observation_points() if observation_points is None else np.asarray(observation_points, float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("observation points must be (d, 2)")
        if np.any(pts <= 0.0) or np.any(pts >= 1.0):
            raise ModelError("observation points must lie strictly inside the domain")
        self.observation_points = pts
        self.source = source
        self.noise_std = float(noise_std)
        self.input_dim = field.n_modes
        self.output_dim = pts.shape[0]
        self._grid = np.linspace(0.0, 1.0, self.n + 1)

    # -- forward map ------------------------------------------------------

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = self._check_theta(theta)
        return self.observe(self.solve(theta))

    def solve(self, theta: np.ndarray) -> np.ndarray:
        """Pressure nodes (n+1, n+1) for the KL permeability at theta."""
        a = self.field.sample(np.asarray(theta, float), self.n)
        return self.solve_from_field(a)

    def permeability(self, theta: np.ndarray) -> np.ndarray:
        return self.field.sample(np.asarray(theta, float), self.n)

    def solve_from_field(self, a_nodes: np.ndarray) -> np.ndarray:
        """Solve -div(a grad p) = f with p = 0 on the boundary.

        `a_nodes` holds nodal permeability values on the (n+1) x (n+1) grid.
        """
        n = self.n
        if a_nodes.shape != (n + 1, n + 1):
            raise ModelError("permeability grid does not match the model resolution")
        if np.any(a_nodes <= 0.0) or not np.all(np.isfinite(a_nodes)):
            raise ModelError("permeability must be positive and finite")
        h = 1.0 / n
        ai = a_nodes[1:-1, 1:-1]  # interior nodes, (n-1, n-1)
        a_e = _harmonic(ai, a_nodes[2:, 1:-1])
        a_w = _harmonic(ai, a_nodes[:-2, 1:-1])
        a_n = _harmonic(ai, a_nodes[1:-1, 2:])
        a_s = _harmonic(ai, a_nodes[1:-1, :-2])

        m = n - 1
        diag = (a_e + a_w + a_n + a_s).ravel() / h**2
        # neighbors in x (first index): offset +-m in row-major (i, j) ordering
        off_e = -a_e[:-1, :].ravel() / h**2
        off_n = -a_n[:, :-1].ravel() / h**2
        idx = np.arange(m * m).reshape(m, m)
        rows, cols, vals = [np.arange(m * m)], [np.arange(m * m)], [diag]
        rows.append(idx[:-1, :].ravel())
        cols.append(idx[1:, :].ravel())
        vals.append(off_e)
        rows.append(idx[:, :-1].ravel())
        cols.append(idx[:, 1:].ravel())
        vals.append(off_n)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        mat = sp.coo_matrix(
            (np.concatenate([v, v[m * m:]]),
             (np.concatenate([r, c[m * m:]]), np.concatenate([c, r[m * m:]]))),
            shape=(m * m, m * m),
        ).tocsr()

        x1, x2 = np.meshgrid(self._grid[1:-1], self._grid[1:-1], indexing="ij")
        rhs = (self.source(x1, x2) if callable(self.source) else np.full_like(x1, float(self.source))).ravel()

        # Jacobi preconditioner: symmetric, so CG convergence theory applies.
        inv_diag = 1.0 / mat.diagonal()
        precond = spla.LinearOperator(mat.shape, lambda x: inv_diag * x)
        sol, info = spla.cg(mat, rhs, rtol=CG_TOL, atol=0.0, maxiter=10 * m * m, M=precond)
        if info != 0:
            resid = np.linalg.norm(mat @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
            raise ModelError(f"conjugate gradients did not converge (relative residual {resid:.3e})")
        pressure = np.zeros((n + 1, n + 1))
        pressure[1:-1, 1:-1] = sol.reshape(m, m)
        return pressure

    # -- observation ------------------------------------------------------

    def observe(self, pressure: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of the pressure grid at the observation points."""
        return self.interpolate(pressure, self.observation_points)

    def interpolate(self, grid_values: np.ndarray, points: np.ndarray) -> np.ndarray:
        n = self.n
        if grid_values.shape != (n + 1, n + 1):
            raise ModelError("grid function does not match the model resolution")
        pts = np.asarray(points, float)
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ModelError("interpolation point outside the domain")
        s = pts * n
        i0 = np.minimum(s.astype(int), n - 1)
        frac = s - i0
        fx, fy = frac[:, 0], frac[:, 1]
        g = grid_values
        return (
            g[i0[:, 0], i0[:, 1]] * (1 - fx) * (1 - fy)
            + g[i0[:, 0] + 1, i0[:, 1]] * fx * (1 - fy)
            + g[i0[:, 0], i0[:, 1] + 1] * (1 - fx) * fy
            + g[i0[:, 0] + 1, i0[:, 1] + 1] * fx * fy
        )
