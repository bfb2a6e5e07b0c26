"""Few-step diffusion sampling with learnable per-step stochastic coefficients."""

from ._core import (
    Denoiser,
    MixtureScoreOracle,
    ScoreField,
    TimeSchedule,
    build_logsnr_schedule,
    build_polynomial_schedule,
    build_uniform_schedule,
    contraction_lambda,
    endpoint_mse,
    error_decomposition,
    exact_w1_small,
    gaussian_tail_q,
    load_denoiser,
    make_double_circle,
    optimize_theta,
    sample,
    sliced_w1,
    train_denoiser,
    w1_1d,
)

__all__ = [
    "Denoiser",
    "MixtureScoreOracle",
    "ScoreField",
    "TimeSchedule",
    "build_logsnr_schedule",
    "build_polynomial_schedule",
    "build_uniform_schedule",
    "contraction_lambda",
    "endpoint_mse",
    "error_decomposition",
    "exact_w1_small",
    "gaussian_tail_q",
    "load_denoiser",
    "make_double_circle",
    "optimize_theta",
    "sample",
    "sliced_w1",
    "train_denoiser",
    "w1_1d",
]

__version__ = "0.1.0"
