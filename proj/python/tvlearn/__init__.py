"""Bilevel learning of fidelity weights for Huber-TV denoising.

Images are 2-D float arrays of shape (ny, nx) with intensities in [0, 1].
"""

from ._core import (
    BilevelConfig,
    Boundary,
    ConvergenceError,
    Error,
    GradMode,
    HuberParams,
    HuberVariant,
    IoError,
    NoiseModel,
    PreconditionError,
    SolverConfig,
    __version__,
    add_noise,
    adjoint_gradient,
    default_lambda0,
    denoise,
    div,
    grad,
    h_gamma,
    huber_value,
    inner,
    learn,
    phantom,
    psnr,
    read_image,
    reduced_cost,
    train,
    write_image,
)

__all__ = [
    "BilevelConfig",
    "Boundary",
    "ConvergenceError",
    "Error",
    "GradMode",
    "HuberParams",
    "HuberVariant",
    "IoError",
    "NoiseModel",
    "PreconditionError",
    "SolverConfig",
    "__version__",
    "add_noise",
    "adjoint_gradient",
    "default_lambda0",
    "denoise",
    "div",
    "grad",
    "h_gamma",
    "huber_value",
    "inner",
    "learn",
    "phantom",
    "psnr",
    "read_image",
    "reduced_cost",
    "train",
    "write_image",
]
