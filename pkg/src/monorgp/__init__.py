"""Recursive Gaussian-process regression with soft monotonicity constraints."""

from .gradient import GradientOperator, TestGrid, build_operator, predict_gradient
from .kernel import InputSpace, KernelParams, make_grid, se_kernel
from .learner import VARIANTS, Learner
from .monotonicity import (
    ConstraintState,
    MonotonicityConfig,
    activations,
    full_update,
    measure_violation,
    sequential_update,
)
from .rgp import RGP, InitializationError, Prediction

__version__ = "0.1.0"

__all__ = [
    "ConstraintState",
    "GradientOperator",
    "InitializationError",
    "InputSpace",
    "KernelParams",
    "Learner",
    "MonotonicityConfig",
    "Prediction",
    "RGP",
    "TestGrid",
    "VARIANTS",
    "activations",
    "build_operator",
    "full_update",
    "make_grid",
    "measure_violation",
    "predict_gradient",
    "se_kernel",
    "sequential_update",
]
