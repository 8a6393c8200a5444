"""Linear output decorrelation so per-output GPs see near-independent targets.

Three variants:
- "identity": no change.
- "diagonal": rotate by the eigenvectors of the observational noise covariance
  (eigenvalues in descending order), diagonalizing the noise.
- "svd": whiten with the SVD of the centered training outputs, giving
  components with unit empirical variance.

A transform maps y -> B (y - shift); predictions are mapped back through the
stored inverse, N(mu, S) -> N(A mu + shift, A S A^T).
"""

from dataclasses import dataclass

import numpy as np

KINDS = ("identity", "diagonal", "svd")
_SVD_FLOOR = 1e-8


@dataclass
class OutputTransform:
    kind: str
    forward_matrix: np.ndarray  # B, (d, d)
    inverse_matrix: np.ndarray  # A = B^-1, (d, d)
    shift: np.ndarray  # (d,)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        self.forward_matrix = np.atleast_2d(np.asarray(self.forward_matrix, float))
        self.inverse_matrix = np.atleast_2d(np.asarray(self.inverse_matrix, float))
        self.shift = np.atleast_1d(np.asarray(self.shift, float))

    @property
    def output_dim(self) -> int:
        return self.shift.size

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Transform a vector (d,) or a stack of rows (n, d)."""
        y = np.asarray(y, float)
        return (y - self.shift) @ self.forward_matrix.T

    def apply_cov(self, cov: np.ndarray) -> np.ndarray:
        return self.forward_matrix @ cov @ self.forward_matrix.T

    def invert_mean(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, float) @ self.inverse_matrix.T + self.shift

    def invert_cov(self, cov: np.ndarray) -> np.ndarray:
        return self.inverse_matrix @ cov @ self.inverse_matrix.T

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "forward_matrix": self.forward_matrix.tolist(),
            "inverse_matrix": self.inverse_matrix.tolist(),
            "shift": self.shift.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OutputTransform":
        return cls(payload["kind"], np.array(payload["forward_matrix"]),
                   np.array(payload["inverse_matrix"]), np.array(payload["shift"]))


def build_transform(kind: str, outputs: np.ndarray,
                    noise_cov: np.ndarray) -> OutputTransform:
    """Fit a transform of the requested kind to training outputs and noise."""
    outputs = np.atleast_2d(np.asarray(outputs, float))
    d = outputs.shape[1]
    if kind == "identity":
        eye = np.eye(d)
        return OutputTransform("identity", eye, eye.copy(), np.zeros(d))
    if kind == "diagonal":
        eigvals, eigvecs = np.linalg.eigh(np.asarray(noise_cov, float))
        order = np.argsort(eigvals)[::-1]
        q = eigvecs[:, order]
        return OutputTransform("diagonal", q.T, q, np.zeros(d))
    if kind == "svd":
        mean = outputs.mean(axis=0)
        centered = outputs - mean
        # scale by sqrt(M) so transformed components have unit population variance
        _, sing, vt = np.linalg.svd(centered / np.sqrt(outputs.shape[0]),
                                    full_matrices=True)
        sing = np.concatenate([sing, np.zeros(d - sing.size)])
        sing = np.maximum(sing, _SVD_FLOOR * max(sing[0], 1.0))
        forward = (vt.T / sing).T  # D^-1 V^T
        inverse = vt.T * sing  # V D
        return OutputTransform("svd", forward, inverse, mean)
    raise ValueError(f"unknown transform kind {kind!r}")
