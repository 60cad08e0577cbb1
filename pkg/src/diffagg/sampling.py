"""Barenblatt profiles, their mixtures, and exact inverse-CDF sampling.

The raw profile ``sqrt(3)/8 * (T**(2/3) - x**2/12)_+`` has mass ``T``; the
probability density used everywhere else is that profile divided by ``T``,
which is exactly the derivative of the cubic CDF inverted by the sampler.

A component with parameters ``(alpha, beta, T, x0)`` contributes
``alpha * beta * p_T(beta * (x - x0))`` with ``p_T`` the normalized density.
Its support is ``x0 +- sqrt(12 T**(2/3)) / beta``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from diffagg.errors import ConfigError, DomainError

SQRT3_OVER_8 = math.sqrt(3.0) / 8.0

# uniform draws equal to 0 are replaced by this value so U lies in (0, 1)
_TINY_UNIFORM = 2.0**-54


def support_halfwidth(T: float) -> float:
    return math.sqrt(12.0 * T ** (2.0 / 3.0))


def _check_T(T):
    if not T > 0:
        raise ConfigError(f"profile parameter T must be positive, got {T!r}")


def barenblatt_profile(x, T: float, x0: float = 0.0):
    """Raw profile with peak ``sqrt(3)/8 * T**(2/3)`` and total mass ``T``."""
    _check_T(T)
    d = np.subtract(x, x0)
    return SQRT3_OVER_8 * np.maximum(T ** (2.0 / 3.0) - d * d / 12.0, 0.0)


def barenblatt_pdf(x, T: float, x0: float = 0.0):
    """Probability density of the profile, peak ``sqrt(3)/8 * T**(-1/3)``."""
    return barenblatt_profile(x, T, x0) / T


def barenblatt_cdf(z, T: float):
    """CDF of the profile centred at 0."""
    _check_T(T)
    z = np.asarray(z, dtype=float)
    w = support_halfwidth(T)
    cubic = SQRT3_OVER_8 * (z / T ** (1.0 / 3.0) - z**3 / (36.0 * T)) + 0.5
    out = np.where(z < -w, 0.0, np.where(z >= w, 1.0, np.clip(cubic, 0.0, 1.0)))
    return out[()] if out.ndim == 0 else out


def barenblatt_inv_cdf(v, T: float):
    """Pseudo-inverse of :func:`barenblatt_cdf` via the trigonometric Cardano root.

    ``v = 0`` maps to the left end of the support instead of ``-inf``.
    """
    _check_T(T)
    v = np.asarray(v, dtype=float)
    if np.any(~((v >= 0.0) & (v <= 1.0))):
        raise DomainError("probability v must lie in [0, 1]")
    p = -36.0 * T ** (2.0 / 3.0)
    q = (v - 0.5) * 96.0 * math.sqrt(3.0) * T
    arg = np.clip(-(q / 2.0) * math.sqrt(-27.0 / p**3), -1.0, 1.0)
    z = -math.sqrt(-4.0 * p / 3.0) * np.cos(np.arccos(arg) / 3.0 + math.pi / 3.0)
    w = support_halfwidth(T)
    z = np.where(v == 1.0, w, np.where(v == 0.0, -w, z))
    return z[()] if z.ndim == 0 else z


@dataclass(frozen=True)
class BarenblattComponent:
    T: float
    x0: float = 0.0
    beta: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        _check_T(self.T)
        if not self.beta > 0:
            raise ConfigError(f"component beta must be positive, got {self.beta!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"component alpha must lie in [0, 1], got {self.alpha!r}")
        if not math.isfinite(self.x0):
            raise ConfigError(f"component x0 must be finite, got {self.x0!r}")

    @property
    def halfwidth(self) -> float:
        return support_halfwidth(self.T) / self.beta

    @property
    def support(self) -> tuple[float, float]:
        return (self.x0 - self.halfwidth, self.x0 + self.halfwidth)

    @property
    def peak(self) -> float:
        """Maximum of the weighted component density."""
        return self.alpha * self.beta * SQRT3_OVER_8 * self.T ** (-1.0 / 3.0)

    def pdf(self, x):
        """Normalized (unweighted) component density."""
        return self.beta * barenblatt_pdf(self.beta * (np.asarray(x, dtype=float) - self.x0), self.T)

    def inv_cdf(self, v):
        return barenblatt_inv_cdf(v, self.T) / self.beta + self.x0


@dataclass(frozen=True)
class InitialDensity:
    components: tuple[BarenblattComponent, ...]

    def __init__(self, components: Sequence[BarenblattComponent]):
        object.__setattr__(self, "components", tuple(components))
        if not self.components:
            raise ConfigError("initial density needs at least one component")
        total = math.fsum(c.alpha for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"invariant sum(alpha) = 1 violated: sum(alpha) = {total!r}")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.components])

    @property
    def support(self) -> tuple[float, float]:
        lo = min(c.support[0] for c in self.components)
        hi = max(c.support[1] for c in self.components)
        return lo, hi

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.components:
            out = out + c.alpha * c.pdf(x)
        return out


def preset(name: str) -> InitialDensity:
    """The two three-bump initial densities with adjacent, disjoint supports.

    ``initial1`` uses beta = (1, 1, 1), ``initial2`` uses beta = (2, 1, 2); both
    have alpha = (1/4, 1/2, 1/4) and T = 2 for every bump.
    """
    betas = {"initial1": (1.0, 1.0, 1.0), "initial2": (2.0, 1.0, 2.0)}
    if name not in betas:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(betas)}")
    b1, b2, b3 = betas[name]
    T = 2.0
    w = support_halfwidth(T)
    x0 = (-w * (1.0 + 1.0 / b1), 0.0, w * (1.0 + 1.0 / b3))
    alphas = (0.25, 0.5, 0.25)
    return InitialDensity(
        [BarenblattComponent(T=T, x0=x, beta=b, alpha=a) for a, b, x in zip(alphas, (b1, b2, b3), x0)]
    )


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


def sample_initial(density: InitialDensity, count: int, rng) -> np.ndarray:
    """Draw ``count`` i.i.d. positions from ``density`` by the composition method.

    Each sample consumes two uniforms from ``rng`` in order: the first selects
    the component (by the cumulative alpha table), the second is fed through
    that component's inverse CDF.
    """
    if count < 1:
        raise ConfigError(f"sample count must be >= 1, got {count!r}")
    rng = as_generator(rng)
    draws = rng.random((count, 2))
    cum = np.cumsum(density.alphas)
    cum[-1] = 1.0
    index = np.searchsorted(cum, draws[:, 0], side="right")
    index = np.minimum(index, len(cum) - 1)
    u = draws[:, 1]
    u[u == 0.0] = _TINY_UNIFORM
    out = np.empty(count)
    for k, comp in enumerate(density.components):
        sel = index == k
        if np.any(sel):
            out[sel] = comp.inv_cdf(u[sel])
    return out


def density_sup_norm(density: InitialDensity, resolution: int = 200_001) -> float:
    peak = max(c.peak for c in density.components)
    supports = sorted(c.support for c in density.components)
    overlap = any(supports[k + 1][0] < supports[k][1] for k in range(len(supports) - 1))
    if not overlap:
        return peak
    lo, hi = density.support
    x = np.linspace(lo, hi, resolution)
    return max(peak, float(density.pdf(x).max()))
