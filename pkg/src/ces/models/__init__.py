from ces.models.base import DivergenceError, ForwardModel, ModelError
from ces.models.linear import LinearModel
from ces.models.kl_field import KLField
from ces.models.darcy import DarcyModel
from ces.models.timeavg import TimeAveragedModel, trapezoid_average
from ces.models.lorenz import Lorenz63Model, Lorenz96Model

__all__ = [
    "ForwardModel",
    "ModelError",
    "DivergenceError",
    "LinearModel",
    "KLField",
    "DarcyModel",
    "TimeAveragedModel",
    "trapezoid_average",
    "Lorenz63Model",
    "Lorenz96Model",
]
