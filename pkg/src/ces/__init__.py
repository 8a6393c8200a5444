"""Calibrate-emulate-sample pipeline for approximate Bayesian inversion.

Three stages: ensemble Kalman calibration concentrates particles near the
posterior, Gaussian-process emulators are trained on the ensemble design,
and random-walk Metropolis samples the emulator-based posterior.
"""

__version__ = "0.1.0"

from ces.backends import active_backend

__all__ = ["active_backend", "__version__"]
