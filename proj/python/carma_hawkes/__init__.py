"""Self-exciting point processes with CARMA-shaped excitation kernels."""

from ._core import (
    ModelSpec,
    acf_confidence,
    check_validity,
    empirical_acf,
    intensity_path,
    kernel_h,
    log_likelihood,
    longrun_cov,
    longrun_var,
    mle_fit,
    mme_fit,
    residual_ks,
    simulate_path,
    stationary_mean_increment,
    theoretical_acf,
)

__all__ = [
    "ModelSpec",
    "acf_confidence",
    "check_validity",
    "empirical_acf",
    "intensity_path",
    "kernel_h",
    "log_likelihood",
    "longrun_cov",
    "longrun_var",
    "mle_fit",
    "mme_fit",
    "residual_ks",
    "simulate_path",
    "stationary_mean_increment",
    "theoretical_acf",
]

__version__ = "0.1.0"
