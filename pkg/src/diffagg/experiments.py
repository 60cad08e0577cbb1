"""End-to-end studies built from the solver modules.

Every study derives the diffusion coefficient from the regime parameter,
``a = 2 b eta ||u0||_inf``, so ``eta > 1`` is diffusion dominated and
``eta < 1`` aggregation dominated.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from diffagg import analysis
from diffagg.kernel import KernelSpec
from diffagg.macro import Grid, GridDensity, MacroConfig, MacroResult, solve
from diffagg.particle import ParticleConfig, Trajectory, simulate
from diffagg.sampling import InitialDensity, density_sup_norm


def diffusion_from_eta(initial: InitialDensity, b: float, eta: float) -> float:
    return 2.0 * b * density_sup_norm(initial) * eta


def snapshot_times(horizon: float, count: int = 8) -> tuple[float, ...]:
    return tuple(horizon * k / count for k in range(count + 1))


def domain(initial: InitialDensity, a: float, horizon: float, dx: float,
           pad_sigmas: float = 6.0, align: float = 1.0) -> Grid:
    """Grid covering the initial support plus ``pad_sigmas`` diffusion lengths on each side."""
    lo, hi = initial.support
    pad = pad_sigmas * math.sqrt(2.0 * a * horizon) + dx
    return Grid.covering(lo - pad, hi + pad, dx, align=max(align, dx))


def macro_run(initial: InitialDensity, a: float, b: float, grid: Grid, horizon: float,
              safety: float = 0.9, output_times: Sequence[float] | None = None,
              **kwargs) -> MacroResult:
    u0 = GridDensity.from_function(initial.pdf, grid)
    cfg = MacroConfig(a, b, horizon, safety=safety, output_times=output_times, **kwargs)
    return solve(u0, cfg)


@dataclass
class EOCStudy:
    report: analysis.ErrorReport
    results: dict[int, MacroResult]
    reference: MacroResult
    a: float


def eoc_study(initial: InitialDensity, eta: float, b: float = 1.0,
              levels: Sequence[int] = (1, 2, 3, 4, 5), reference_level: int = 6,
              horizon: float = 7.0, safety: float = 0.9, n_snapshots: int = 8,
              pad_sigmas: float = 6.0) -> EOCStudy:
    """Self-convergence in discrete L1 against a fine reference with ``dx = 2**-reference_level``.

    All grids share the same window so the reference restricts exactly onto
    every coarse level.
    """
    a = diffusion_from_eta(initial, b, eta)
    times = snapshot_times(horizon, n_snapshots)
    coarsest = 2.0 ** -min(levels)
    ref_grid = domain(initial, a, horizon, 2.0**-reference_level, pad_sigmas, align=coarsest)
    ref = macro_run(initial, a, b, ref_grid, horizon, safety, times)
    results, errs = {}, []
    for lev in levels:
        g = Grid(ref_grid.x_min, 2.0**-lev, int(round(ref_grid.length * 2.0**lev)))
        res = macro_run(initial, a, b, g, horizon, safety, times)
        results[lev] = res
        restricted = [analysis.restrict(s, g) for s in ref.snapshots]
        errs.append(analysis.error_norms(restricted, res.snapshots, 1))
    labels = [f"2^-{lev}" for lev in levels]
    report = analysis.ErrorReport(labels, {"1": errs}, label_name="dx")
    return EOCStudy(report, results, ref, a)


def histogram_series(traj: Trajectory, grid: Grid) -> list[GridDensity]:
    return [analysis.density_histogram(traj.positions[:, k, :], grid, float(t))
            for k, t in enumerate(traj.times)]


@dataclass
class ComparisonStudy:
    report: analysis.ErrorReport
    macro: MacroResult
    histograms: dict[int, list[GridDensity]]
    a: float


def particle_vs_macro(initial: InitialDensity, eta: float, counts: Sequence[int],
                      M: int, b: float = 1.0, epsilon: float = 1.5, dx: float = 2.0**-3,
                      dt: float = 0.02, horizon: float = 7.0, seed: int = 0,
                      safety: float = 0.9, n_snapshots: int = 8, workers: int = 1,
                      pad_sigmas: float = 6.0) -> ComparisonStudy:
    """Distance between replica-averaged particle histograms and the grid solution.

    Both live on the same cells and snapshot times; norms are max over
    snapshots of the discrete inf-, 1- and 2-norms.
    """
    a = diffusion_from_eta(initial, b, eta)
    times = snapshot_times(horizon, n_snapshots)
    grid = domain(initial, a, horizon, dx, pad_sigmas)
    macro = macro_run(initial, a, b, grid, horizon, safety, times)
    kernel = KernelSpec(b=b, epsilon=epsilon)
    errors = {"inf": [], "1": [], "2": []}
    hists = {}
    for n in counts:
        cfg = ParticleConfig(N=n, a=a, kernel=kernel, horizon=horizon, dt=dt, seed=seed,
                             M=M, output_times=times)
        hist = histogram_series(simulate(cfg, initial, workers=workers), grid)
        hists[n] = hist
        for key, p in (("inf", math.inf), ("1", 1), ("2", 2)):
            errors[key].append(analysis.error_norms(hist, macro.snapshots, p))
    report = analysis.ErrorReport(list(counts), errors, label_name="N")
    return ComparisonStudy(report, macro, hists, a)


def particle_running_sup(initial: InitialDensity, eta: float, N: int, M: int,
                         b: float = 1.0, epsilon: float = 1.5, dx: float = 2.0**-3,
                         dt: float = 0.02, horizon: float = 7.0, seed: int = 0,
                         n_snapshots: int = 28, workers: int = 1):
    """Running supremum of the histogram density of a particle run; returns ``(times, sup)``."""
    a = diffusion_from_eta(initial, b, eta)
    times = snapshot_times(horizon, n_snapshots)
    grid = domain(initial, a, horizon, dx)
    cfg = ParticleConfig(N=N, a=a, kernel=KernelSpec(b=b, epsilon=epsilon), horizon=horizon,
                         dt=dt, seed=seed, M=M, output_times=times)
    hist = histogram_series(simulate(cfg, initial, workers=workers), grid)
    return np.array(times), analysis.running_supremum(hist)
