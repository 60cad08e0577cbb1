"""Fractional-step finite differences for ``u_t + 2b (u_x u)_x = a u_xx``.

One step applies the upwind advection update first and the explicit heat
update second.  The grid is truncated to a finite window with two zero ghost
cells on each side; fluxes through the outer faces are kept so that mass
leaving the window is visible as a deficit rather than silently reflected.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from diffagg.errors import ConfigError, DomainError, StepSizeError

# relative slack on the step-size checks, for dt computed right at the bound
_STEP_SLACK = 1e-12


class MassLeakWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Grid:
    x_min: float
    dx: float
    n_cells: int

    def __post_init__(self):
        if not self.dx > 0:
            raise ConfigError(f"grid spacing must be positive, got {self.dx!r}")
        if self.n_cells < 3:
            raise ConfigError(f"grid needs at least 3 cells, got {self.n_cells!r}")

    @property
    def x_max(self) -> float:
        return self.x_min + self.n_cells * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def length(self) -> float:
        return self.n_cells * self.dx

    @classmethod
    def covering(cls, lo: float, hi: float, dx: float, align: float = 1.0) -> "Grid":
        """Smallest grid with edges on multiples of ``align`` that contains ``[lo, hi]``.

        ``align`` must be an integer multiple of ``dx`` for the cell count to be exact.
        """
        x_min = math.floor(lo / align) * align
        x_max = math.ceil(hi / align) * align
        return cls(x_min, dx, int(round((x_max - x_min) / dx)))


@dataclass
class GridDensity:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise DomainError(
                f"expected {self.grid.n_cells} values, got shape {self.values.shape}"
            )

    def mass(self) -> float:
        return self.grid.dx * float(np.sum(self.values))

    def sup(self) -> float:
        return float(np.max(self.values))

    def replace(self, values, time=None) -> "GridDensity":
        return GridDensity(self.grid, values, self.time if time is None else time)

    @classmethod
    def from_function(cls, f, grid: Grid, time: float = 0.0) -> "GridDensity":
        """Sample ``f`` at cell centres."""
        return cls(grid, np.asarray(f(grid.centers), dtype=float), time)


@dataclass
class MacroConfig:
    a: float
    b: float
    horizon: float
    safety: float = 0.9
    output_times: tuple[float, ...] | None = None
    blowup_factor: float = 10.0
    blowup_window: int = 5000
    leak_tolerance: float = 1e-9
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.a >= 0:
            raise ConfigError(f"diffusion coefficient a must be >= 0, got {self.a!r}")
        if not self.b >= 0:
            raise ConfigError(f"aggregation coefficient b must be >= 0, got {self.b!r}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        if not 0 < self.safety <= 1:
            raise ConfigError(f"safety factor must lie in (0, 1], got {self.safety!r}")
        if self.output_times is None:
            self.output_times = tuple(self.horizon * k / 8 for k in range(9))
        self.output_times = tuple(sorted(float(t) for t in self.output_times))
        if self.output_times and (self.output_times[0] < 0 or self.output_times[-1] > self.horizon):
            raise ConfigError("output times must lie in [0, horizon]")


def _padded(u: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0, 0.0], u, [0.0, 0.0]))


def face_derivatives(u: GridDensity) -> np.ndarray:
    """Averaged central differences on all ``n + 1`` faces.

    Entry ``f`` belongs to the face between cells ``f - 1`` and ``f``.
    """
    up = _padded(u.values)
    d0 = (up[2:] - up[:-2]) / (2.0 * u.grid.dx)
    return (d0[1:] + d0[:-1]) / 2.0


def face_derivative(u: GridDensity, i: int) -> float:
    """Derivative estimate at the face between cells ``i`` and ``i + 1`` (``-1 <= i < n``)."""
    if not -1 <= i < u.grid.n_cells:
        raise DomainError(f"face index {i} outside [-1, {u.grid.n_cells - 1}]")
    return float(face_derivatives(u)[i + 1])


def numerical_fluxes(u: GridDensity, b: float) -> np.ndarray:
    d = face_derivatives(u)
    vals = np.concatenate(([0.0], u.values, [0.0]))
    upwind = np.where(d >= 0.0, vals[:-1], vals[1:])
    return 2.0 * b * d * upwind


def numerical_flux(u: GridDensity, i: int, b: float) -> float:
    """Upwind flux through the face between cells ``i`` and ``i + 1``."""
    if not -1 <= i < u.grid.n_cells:
        raise DomainError(f"face index {i} outside [-1, {u.grid.n_cells - 1}]")
    return float(numerical_fluxes(u, b)[i + 1])


def heat_step(u: GridDensity, a: float, dt: float) -> GridDensity:
    lam = a * dt / u.grid.dx**2
    if lam > 0.5 * (1.0 + _STEP_SLACK):
        raise StepSizeError(f"heat step unstable: a*dt/dx^2 = {lam!r} > 1/2")
    up = np.concatenate(([0.0], u.values, [0.0]))
    new = u.values + lam * (up[2:] - 2.0 * u.values + up[:-2])
    return u.replace(new, u.time)


def advection_step(u: GridDensity, b: float, dt: float) -> GridDensity:
    flux = numerical_fluxes(u, b)
    if b > 0:
        dmax = float(np.max(np.abs(face_derivatives(u))))
        if 4.0 * b * dmax * dt > u.grid.dx * (1.0 + _STEP_SLACK):
            raise StepSizeError(
                f"advection step violates positivity bound: 4 b max|u_x| dt / dx = "
                f"{4.0 * b * dmax * dt / u.grid.dx!r} > 1"
            )
    new = u.values - dt / u.grid.dx * (flux[1:] - flux[:-1])
    return u.replace(new, u.time)


def cfl_dt(u: GridDensity, a: float, b: float, safety: float = 0.9,
           max_dt: float | None = None) -> float:
    """Largest positivity-preserving step times ``safety``, optionally capped by ``max_dt``."""
    dx = u.grid.dx
    diffusive = dx * dx / (2.0 * a) if a > 0 else math.inf
    dmax = float(np.max(np.abs(face_derivatives(u))))
    advective = dx / (4.0 * b * dmax) if b > 0 and dmax > 0 else math.inf
    dt = safety * min(diffusive, advective)
    if max_dt is not None:
        dt = min(dt, max_dt)
    if math.isinf(dt):
        raise ConfigError("time step is unbounded: a = 0, b = 0 (or flat data) and no cap given")
    return dt


def composite_step(u: GridDensity, config: MacroConfig, dt: float) -> GridDensity:
    out = heat_step(advection_step(u, config.b, dt), config.a, dt)
    out.time = u.time + dt
    return out


@dataclass
class BlowUp:
    time: float
    step: int
    sup: float
    threshold: float

    def describe(self) -> str:
        return (f"blow-up at t={self.time!r} (step {self.step}): max u = {self.sup!r} "
                f"above a/(2b) = {self.threshold!r}")


@dataclass
class MacroResult:
    snapshots: list[GridDensity]
    step_times: np.ndarray
    step_sup: np.ndarray
    steps: int
    initial_mass: float
    final: GridDensity
    blowup: BlowUp | None = None
    leaked_mass: float = 0.0
    max_step_mass_change: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def running_sup(self) -> np.ndarray:
        return np.maximum.accumulate(self.step_sup)


def solve(u0: GridDensity, config: MacroConfig) -> MacroResult:
    """Advance ``u0`` to ``config.horizon`` with adaptive positivity-preserving steps.

    Stops early with ``result.blowup`` set when, in the aggregation regime, the
    maximum exceeds ``a/(2b)`` and has grown by ``blowup_factor`` within the last
    ``blowup_window`` steps.
    """
    if np.any(u0.values < 0):
        raise ConfigError("initial density must be nonnegative")
    a, b, T = config.a, config.b, config.horizon
    threshold = a / (2.0 * b) if b > 0 else math.inf
    pending = [t for t in config.output_times if t >= u0.time]
    snapshots: list[GridDensity] = []
    u = u0
    mass0 = u.mass()
    times, sups = [u.time], [u.sup()]
    window: deque[float] = deque([u.sup()], maxlen=config.blowup_window + 1)
    max_change = 0.0
    warned = False
    steps = 0
    blowup = None

    while pending and pending[0] <= u.time:
        snapshots.append(u.replace(u.values.copy(), pending.pop(0)))

    while u.time < T:
        target = pending[0] if pending else T
        remaining = target - u.time
        dt = cfl_dt(u, a, b, config.safety, max_dt=remaining)
        last = dt >= remaining
        prev_mass = u.mass()
        u = composite_step(u, config, dt)
        if last:
            u.time = target
        steps += 1
        m = u.mass()
        max_change = max(max_change, abs(m - prev_mass))
        s = u.sup()
        times.append(u.time)
        sups.append(s)
        if u.values.min() < -1e-12 * max(1.0, s):
            raise RuntimeError(f"positivity lost at t={u.time!r}: min u = {u.values.min()!r}")
        if not warned and abs(mass0 - m) > config.leak_tolerance:
            warnings.warn(f"mass changed by {mass0 - m!r} through the domain boundary by "
                          f"t={u.time!r}", MassLeakWarning, stacklevel=2)
            warned = True
        while pending and pending[0] <= u.time:
            snapshots.append(u.replace(u.values.copy(), pending.pop(0)))
        window.append(s)
        if s > threshold and s > config.blowup_factor * min(window):
            blowup = BlowUp(u.time, steps, s, threshold)
            break
        if steps >= config.max_steps:
            raise RuntimeError(f"step limit {config.max_steps} reached at t={u.time!r}")

    return MacroResult(
        snapshots=snapshots,
        step_times=np.array(times),
        step_sup=np.array(sups),
        steps=steps,
        initial_mass=mass0,
        final=u,
        blowup=blowup,
        leaked_mass=mass0 - u.mass(),
        max_step_mass_change=max_change,
    )
