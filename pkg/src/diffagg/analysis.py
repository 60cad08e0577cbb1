"""Histogram density estimates, discrete error norms and convergence orders."""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from diffagg.errors import DomainError
from diffagg.macro import Grid, GridDensity


class CoverageWarning(UserWarning):
    pass


def mass(u: GridDensity) -> float:
    return u.grid.dx * float(np.sum(u.values))


def bin_counts(samples, grid: Grid) -> tuple[np.ndarray, int]:
    """Counts per cell of the half-open bins ``[x_i - dx/2, x_i + dx/2)`` and the number outside."""
    x = np.asarray(samples, dtype=float).ravel()
    idx = np.floor((x - grid.x_min) / grid.dx).astype(np.int64)
    inside = (idx >= 0) & (idx < grid.n_cells)
    counts = np.bincount(idx[inside], minlength=grid.n_cells)
    return counts, int(x.size - np.count_nonzero(inside))


def density_histogram(samples, grid: Grid, time: float = 0.0) -> GridDensity:
    """Replica-averaged histogram of particle positions.

    ``samples`` has shape ``(M, N)`` (or ``(N,)`` for a single replica); each
    cell gets ``count / (M N dx)``.  Samples outside the grid are dropped with
    a :class:`CoverageWarning`.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[None, :]
    M, N = samples.shape
    counts, outside = bin_counts(samples, grid)
    if outside:
        warnings.warn(f"{outside} of {M * N} samples fall outside the grid "
                      f"[{grid.x_min}, {grid.x_max})", CoverageWarning, stacklevel=2)
    return GridDensity(grid, counts / (M * N * grid.dx), time)


def _check_series(u: Sequence[GridDensity], v: Sequence[GridDensity]):
    if len(u) != len(v) or not u:
        raise DomainError(f"series lengths differ or are empty: {len(u)} vs {len(v)}")
    for a, b in zip(u, v):
        if a.grid != b.grid:
            raise DomainError(f"grid mismatch: {a.grid} vs {b.grid}")
        if not math.isclose(a.time, b.time, rel_tol=1e-12, abs_tol=1e-12):
            raise DomainError(f"snapshot time mismatch: {a.time} vs {b.time}")


def error_norms(u: Sequence[GridDensity], v: Sequence[GridDensity], p: float) -> float:
    """Max over snapshots of the discrete ``p``-norm of ``u - v``; ``p = inf`` is the pointwise max."""
    _check_series(u, v)
    worst = 0.0
    for a, b in zip(u, v):
        e = np.abs(a.values - b.values)
        if math.isinf(p):
            val = float(e.max())
        else:
            val = (a.grid.dx * float(np.sum(e**p))) ** (1.0 / p)
        worst = max(worst, val)
    return worst


def eoc(errors: Sequence[float], factor: float = 2.0) -> list[float]:
    errors = [float(e) for e in errors]
    if any(not e > 0 for e in errors):
        raise DomainError(f"errors must be positive for an order estimate, got {errors}")
    return [math.log(errors[k] / errors[k + 1]) / math.log(factor) for k in range(len(errors) - 1)]


def running_supremum(series) -> np.ndarray:
    """Cumulative maximum of ``max_i u_i`` over a time series (or of raw sup values)."""
    sups = [s.sup() if isinstance(s, GridDensity) else float(s) for s in series]
    return np.maximum.accumulate(np.array(sups, dtype=float))


def restrict(fine: GridDensity, coarse: Grid) -> GridDensity:
    """Average fine cells onto an aligned coarser grid."""
    ratio = coarse.dx / fine.grid.dx
    r = int(round(ratio))
    offset = (coarse.x_min - fine.grid.x_min) / fine.grid.dx
    o = int(round(offset))
    if r < 1 or abs(ratio - r) > 1e-9 * ratio or abs(offset - o) > 1e-9 * max(1.0, abs(offset)):
        raise DomainError(f"coarse grid {coarse} is not aligned with fine grid {fine.grid}")
    if o < 0 or o + coarse.n_cells * r > fine.grid.n_cells:
        raise DomainError(f"coarse grid {coarse} extends beyond fine grid {fine.grid}")
    block = fine.values[o:o + coarse.n_cells * r].reshape(coarse.n_cells, r)
    return GridDensity(coarse, block.mean(axis=1), fine.time)


@dataclass
class ErrorReport:
    """Errors per refinement level (or particle count) and the orders between levels."""

    labels: list
    errors: dict[str, list[float]]
    eoc: dict[str, list[float]] = field(default_factory=dict)
    label_name: str = "level"

    def __post_init__(self):
        if not self.eoc:
            self.eoc = {k: eoc(v) for k, v in self.errors.items()}

    def rows(self):
        norms = list(self.errors)
        header = [self.label_name]
        for n in norms:
            header += [f"err_{n}", f"eoc_{n}"]
        yield header
        for k, label in enumerate(self.labels):
            row = [label]
            for n in norms:
                row.append(self.errors[n][k])
                row.append(self.eoc[n][k - 1] if k > 0 else "")
            yield row
