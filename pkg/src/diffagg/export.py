"""CSV writers.  Every file starts with a ``# diffagg-csv v1 kind=...`` line."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path, kind: str, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# diffagg-csv v{SCHEMA_VERSION} kind={kind}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(kind, header, rows)`` with rows as lists of strings."""
    with Path(path).open() as fh:
        first = fh.readline().strip()
        kind = first.split("kind=", 1)[1] if "kind=" in first else None
        rows = list(csv.reader(fh))
    return kind, rows[0], rows[1:]


def write_snapshots(path, snapshots) -> Path:
    def rows():
        for s in snapshots:
            for x, u in zip(s.grid.centers, s.values):
                yield (float(s.time), float(x), float(u))
    return write_csv(path, "snapshots", ["time", "x_center", "u"], rows())


def write_running_sup(path, times, sups) -> Path:
    return write_csv(path, "running_sup", ["time", "sup"],
                     ((float(t), float(s)) for t, s in zip(times, sups)))


def write_trajectories(path, traj) -> Path:
    def rows():
        M, K, N = traj.positions.shape
        for m in range(M):
            for k in range(K):
                t = float(traj.times[k])
                for i in range(N):
                    yield (m, t, i, float(traj.positions[m, k, i]))
    return write_csv(path, "trajectories", ["replica", "time", "particle_index", "position"], rows())


def write_report(path, report, kind: str = "error_report") -> Path:
    rows = report.rows()
    header = next(rows)
    return write_csv(path, kind, header, rows)
