"""Gaussian interaction potential and its mollified rescaling.

The potential is ``V(x) = b / sqrt(2 pi) * exp(-x**2 / 2)`` and the mollified
kernel is ``V_eps(x) = eps**-d * V(x / eps)``.  In one dimension ``V_eps``
integrates to ``b``; callers wanting the ``2b`` normalization used by the
macroscopic equation must pass ``2b`` themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from diffagg.errors import ConfigError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    b: float = 1.0
    epsilon: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"kernel epsilon must be positive, got {self.epsilon!r}")
        if not self.b >= 0:
            raise ConfigError(f"kernel mass b must be nonnegative, got {self.b!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigError(f"kernel dim must be a positive integer, got {self.dim!r}")

    @property
    def weight(self) -> float:
        """Peak value of the unscaled potential, ``b / sqrt(2 pi)``."""
        return self.b * INV_SQRT_2PI

    def integral(self) -> float:
        """Exact integral of the one-dimensional kernel over the real line."""
        return self.b


def kernel_value(x, spec: KernelSpec):
    r = np.divide(x, spec.epsilon)
    return spec.weight * np.exp(-0.5 * r * r) * spec.epsilon ** (-spec.dim)


def kernel_grad(x, spec: KernelSpec):
    """Derivative of :func:`kernel_value` in ``x``; odd in ``x``."""
    r = np.divide(x, spec.epsilon)
    return -r * (spec.weight * np.exp(-0.5 * r * r)) * spec.epsilon ** (-spec.dim - 1)


def second_derivative_sup(spec: KernelSpec) -> float:
    """``sup |V''|`` of the unscaled potential.

    ``V'' = (x**2 - 1) V`` peaks in modulus at ``x = 0``.
    """
    return spec.weight
