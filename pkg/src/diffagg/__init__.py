"""Particle and grid solvers for a 1-D diffusion-aggregation equation."""

from diffagg.errors import ConfigError, DomainError, StepSizeError
from diffagg.kernel import KernelSpec, kernel_grad, kernel_value, second_derivative_sup
from diffagg.sampling import (
    BarenblattComponent,
    InitialDensity,
    barenblatt_cdf,
    barenblatt_inv_cdf,
    barenblatt_pdf,
    density_sup_norm,
    preset,
    sample_initial,
)

__version__ = "0.1.0"

__all__ = [
    "BarenblattComponent",
    "ConfigError",
    "DomainError",
    "InitialDensity",
    "KernelSpec",
    "StepSizeError",
    "barenblatt_cdf",
    "barenblatt_inv_cdf",
    "barenblatt_pdf",
    "density_sup_norm",
    "kernel_grad",
    "kernel_value",
    "preset",
    "sample_initial",
    "second_derivative_sup",
]
