from ces.emulation.kernels import KernelSpec, kernel_eval
from ces.emulation.gp import GpComponent, fit_gp
from ces.emulation.lengthscale_priors import GammaPrior, elicit_lengthscale_priors
from ces.emulation.transforms import OutputTransform, build_transform
from ces.emulation.emulator import GpEmulator, train_emulator
from ces.emulation.misfits import Misfit, misfit_eval

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "GpComponent",
    "fit_gp",
    "GammaPrior",
    "elicit_lengthscale_priors",
    "OutputTransform",
    "build_transform",
    "GpEmulator",
    "train_emulator",
    "Misfit",
    "misfit_eval",
]
