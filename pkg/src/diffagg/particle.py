"""Euler-Maruyama integration of the interacting particle system.

Each particle moves by

    Y_i <- Y_i + sqrt(2a) dB_i + dt / N * sum_{j != i} V_eps'(Y_i - Y_j)

with the kernel gradient evaluated at the signed difference, so pairwise
contributions are exactly antisymmetric.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from diffagg.errors import ConfigError, DomainError
from diffagg.kernel import KernelSpec, second_derivative_sup
from diffagg.sampling import InitialDensity, sample_initial


@numba.njit(cache=True, nogil=True)
def _drift_all(pos, weight, eps, dim, out):
    # Pair loop visits (i, j) with i < j once; every particle still receives
    # its contributions in ascending j order, matching the naive loop bitwise.
    n = pos.shape[0]
    scale = eps ** (-dim - 1)
    for i in range(n):
        out[i] = 0.0
    for i in range(n):
        xi = pos[i]
        acc = out[i]
        for j in range(i + 1, n):
            r = (xi - pos[j]) / eps
            g = -r * (weight * math.exp(-0.5 * r * r)) * scale
            acc += g
            out[j] -= g
        out[i] = acc
    for i in range(n):
        out[i] /= n


@numba.njit(cache=True)
def _drift_one(pos, i, weight, eps, dim):
    scale = eps ** (-dim - 1)
    acc = 0.0
    for j in range(pos.shape[0]):
        if j != i:
            r = (pos[i] - pos[j]) / eps
            acc += -r * (weight * math.exp(-0.5 * r * r)) * scale
    return acc / pos.shape[0]


@numba.njit(cache=True, nogil=True)
def _integrate(pos, noise, dts, sqrt2a, weight, eps, dim, record, out):
    # noise holds standard normals (steps, n); record[k] is the step index
    # after which snapshot k is taken (-1 means the initial state).
    n = pos.shape[0]
    drift = np.empty(n)
    k = 0
    while k < record.shape[0] and record[k] < 0:
        out[k, :] = pos
        k += 1
    for s in range(dts.shape[0]):
        dt = dts[s]
        sdt = math.sqrt(dt)
        _drift_all(pos, weight, eps, dim, drift)
        for i in range(n):
            pos[i] = pos[i] + noise[s, i] * sdt * sqrt2a + dt * drift[i]
        while k < record.shape[0] and record[k] == s:
            out[k, :] = pos
            k += 1


def drift(positions, i: int, kernel: KernelSpec) -> float:
    """Drift on particle ``i``, summed over ``j`` in ascending order."""
    positions = np.ascontiguousarray(positions, dtype=float)
    n = positions.shape[0]
    if not 0 <= i < n:
        raise DomainError(f"particle index {i} out of range for {n} particles")
    return _drift_one(positions, i, kernel.weight, kernel.epsilon, kernel.dim)


def drift_all(positions, kernel: KernelSpec) -> np.ndarray:
    positions = np.ascontiguousarray(positions, dtype=float)
    out = np.empty_like(positions)
    _drift_all(positions, kernel.weight, kernel.epsilon, kernel.dim, out)
    return out


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    time: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1 or self.positions.size < 1:
            raise ConfigError("ensemble needs a 1-D array of at least one position")


@dataclass
class ParticleConfig:
    N: int
    a: float
    kernel: KernelSpec
    horizon: float
    dt: float = 0.01
    seed: int = 0
    M: int = 1
    output_times: tuple[float, ...] | None = None
    time_grid: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"particle count N must be >= 1, got {self.N!r}")
        if self.M < 1:
            raise ConfigError(f"replica count M must be >= 1, got {self.M!r}")
        if not self.a >= 0:
            raise ConfigError(f"diffusion coefficient a must be >= 0, got {self.a!r}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.output_times is None:
            self.output_times = tuple(self.horizon * k / 4 for k in range(5))
        self.output_times = tuple(float(t) for t in self.output_times)
        if any(t < 0 or t > self.horizon for t in self.output_times):
            raise ConfigError("output times must lie in [0, horizon]")
        if list(self.output_times) != sorted(self.output_times):
            raise ConfigError("output times must be sorted")
        if self.time_grid is not None:
            g = np.asarray(self.time_grid, dtype=float)
            if g[0] != 0.0 or np.any(np.diff(g) <= 0):
                raise ConfigError("time grid must start at 0 and increase strictly")
            self.time_grid = g

    def grid(self) -> np.ndarray:
        """Time points ``0 = t_0 < ... < t_S = horizon``.

        Uniform steps of ``dt``, shortened where needed to land on every output
        time and on the horizon.
        """
        if self.time_grid is not None:
            return self.time_grid
        marks = sorted(set(self.output_times) | {self.horizon})
        pts = [0.0]
        for mark in marks:
            # march from the last point towards the mark in dt steps
            start = pts[-1]
            if mark <= start:
                continue
            nsteps = max(1, math.ceil((mark - start) / self.dt - 1e-9))
            pts.extend(start + self.dt * k for k in range(1, nsteps))
            pts.append(mark)
        return np.array(pts)


@dataclass
class Trajectory:
    """Recorded ensembles: ``positions[m, k, i]`` for replica m at ``times[k]``."""

    times: np.ndarray
    positions: np.ndarray
    a: float
    config: ParticleConfig


def em_step(state: ParticleEnsemble, config: ParticleConfig, increments, dt: float | None = None):
    """One Euler-Maruyama step; ``increments`` are Brownian increments with variance ``dt``."""
    dt = config.dt if dt is None else dt
    increments = np.asarray(increments, dtype=float)
    if increments.shape != state.positions.shape:
        raise DomainError(
            f"expected {state.positions.shape[0]} increments, got {increments.shape}"
        )
    d = drift_all(state.positions, config.kernel)
    new = state.positions + increments * math.sqrt(2.0 * config.a) + dt * d
    return ParticleEnsemble(new, state.time + dt, state.step_index + 1)


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream for one replica, keyed by ``(seed, replica)``."""
    ss = np.random.SeedSequence(seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(ss))


def _run_replica(config: ParticleConfig, initial: InitialDensity, replica: int,
                 dts: np.ndarray, record: np.ndarray) -> np.ndarray:
    rng = replica_generator(config.seed, replica)
    pos = sample_initial(initial, config.N, rng)
    noise = rng.standard_normal((dts.shape[0], config.N))
    out = np.empty((record.shape[0], config.N))
    k = config.kernel
    _integrate(pos, noise, dts, math.sqrt(2.0 * config.a), k.weight, k.epsilon, k.dim, record, out)
    return out


def simulate(config: ParticleConfig, initial: InitialDensity, workers: int = 1) -> Trajectory:
    """Run ``config.M`` independent replicas and record them at the output times.

    Replica ``m`` draws its initial positions and then all Brownian increments
    (step-major, particle-minor) from :func:`replica_generator`, so results do
    not depend on ``workers``.
    """
    grid = config.grid()
    dts = np.diff(grid)
    index = {float(t): s for s, t in enumerate(grid)}
    record = np.array([index[t] - 1 for t in config.output_times], dtype=np.int64)
    positions = np.empty((config.M, record.shape[0], config.N))

    def job(m):
        positions[m] = _run_replica(config, initial, m, dts, record)

    if workers <= 1:
        for m in range(config.M):
            job(m)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(config.M)))
    return Trajectory(np.array(config.output_times), positions, config.a, config)


def mean_field_bound(epsilon: float, t: float, kernel: KernelSpec, N: int) -> float:
    """Right-hand side of the particle/intermediate-model L2 estimate divided by its constant."""
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N!r}")
    v2 = second_derivative_sup(kernel)
    d = kernel.dim
    growth = math.exp(t * t * v2 * v2 * epsilon ** (-2 * d - 4))
    return t / N * (math.sqrt(math.pi) / 2 * epsilon ** (d + 2) / v2 * growth + t)


def min_particle_count(epsilon: float, t: float, kernel: KernelSpec, threshold: float) -> int:
    if not threshold > 0:
        raise ConfigError(f"threshold must be positive, got {threshold!r}")
    n = max(1, math.ceil(mean_field_bound(epsilon, t, kernel, 1) / threshold))
    while mean_field_bound(epsilon, t, kernel, n) > threshold:
        n += 1
    while n > 1 and mean_field_bound(epsilon, t, kernel, n - 1) <= threshold:
        n -= 1
    return n
