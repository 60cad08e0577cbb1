"""Command-line scenario runner.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
3 blow-up detected in a grid run (partial outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from diffagg import __version__, analysis, experiments, export
from diffagg.config import Scenario, load_scenario
from diffagg.errors import ConfigError
from diffagg.kernel import KernelSpec, second_derivative_sup
from diffagg.particle import ParticleConfig, mean_field_bound, min_particle_count, simulate
from diffagg.sampling import density_sup_norm

log = logging.getLogger("diffagg")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3
PUBLISHED_PARTICLE_COUNT = 555


def _run_bound(sc: Scenario, out: Path, manifest: dict) -> int:
    kernel = KernelSpec(b=sc.b, epsilon=sc.epsilon)
    n = min_particle_count(sc.epsilon, sc.horizon, kernel, sc.threshold)
    manifest["derived"].update(
        second_derivative_sup=second_derivative_sup(kernel),
        bound_at_N1=mean_field_bound(sc.epsilon, sc.horizon, kernel, 1),
        min_particle_count=n,
        bound_at_min_N=mean_field_bound(sc.epsilon, sc.horizon, kernel, n),
        published_particle_count=PUBLISHED_PARTICLE_COUNT,
    )
    export.write_csv(out / "bound.csv", "bound",
                     ["epsilon", "t", "b", "threshold", "min_particle_count", "published_particle_count"],
                     [(sc.epsilon, sc.horizon, sc.b, sc.threshold, n, PUBLISHED_PARTICLE_COUNT)])
    manifest["files"].append("bound.csv")
    return EXIT_OK


def _run_particle(sc: Scenario, out: Path, manifest: dict, workers: int) -> int:
    initial = sc.initial()
    a = manifest["a"]
    cfg = ParticleConfig(N=sc.N, a=a, kernel=KernelSpec(b=sc.b, epsilon=sc.epsilon),
                         horizon=sc.horizon, dt=sc.dt, seed=sc.seed, M=sc.M,
                         output_times=sc.times())
    traj = simulate(cfg, initial, workers=workers)
    grid = experiments.domain(initial, a, sc.horizon, sc.dx, sc.pad_sigmas)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", analysis.CoverageWarning)
        hist = experiments.histogram_series(traj, grid)
    outside = sum(analysis.bin_counts(traj.positions[:, k, :], grid)[1] for k in range(len(traj.times)))
    if caught:
        log.warning("%d samples fell outside the histogram grid", outside)
    manifest["derived"].update(grid_x_min=grid.x_min, grid_n_cells=grid.n_cells,
                               samples_outside_grid=outside, time_steps=len(cfg.grid()) - 1)
    export.write_snapshots(out / "density.csv", hist)
    export.write_running_sup(out / "running_sup.csv", traj.times, analysis.running_supremum(hist))
    manifest["files"] += ["density.csv", "running_sup.csv"]
    if sc.write_trajectories:
        export.write_trajectories(out / "trajectories.csv", traj)
        manifest["files"].append("trajectories.csv")
    return EXIT_OK


def _run_macro(sc: Scenario, out: Path, manifest: dict) -> int:
    initial = sc.initial()
    a = manifest["a"]
    grid = experiments.domain(initial, a, sc.horizon, sc.dx, sc.pad_sigmas)
    res = experiments.macro_run(initial, a, sc.b, grid, sc.horizon, sc.safety, sc.times(),
                                blowup_factor=sc.blowup_factor, blowup_window=sc.blowup_window)
    export.write_snapshots(out / "snapshots.csv", res.snapshots)
    export.write_running_sup(out / "running_sup.csv", res.step_times, res.running_sup)
    manifest["files"] += ["snapshots.csv", "running_sup.csv"]
    manifest["derived"].update(grid_x_min=grid.x_min, grid_n_cells=grid.n_cells, steps=res.steps,
                               final_time=res.final.time, initial_mass=res.initial_mass,
                               leaked_mass=res.leaked_mass,
                               max_step_mass_change=res.max_step_mass_change,
                               threshold_a_over_2b=a / (2 * sc.b) if sc.b > 0 else None)
    if res.blowup is not None:
        manifest["blowup"] = {"time": res.blowup.time, "step": res.blowup.step,
                              "sup": res.blowup.sup, "threshold": res.blowup.threshold}
        log.error("%s", res.blowup.describe())
        return EXIT_BLOWUP
    return EXIT_OK


def _run_eoc(sc: Scenario, out: Path, manifest: dict) -> int:
    study = experiments.eoc_study(sc.initial(), sc.eta, sc.b, sc.levels, sc.reference_level,
                                  sc.horizon, sc.safety, sc.n_snapshots, sc.pad_sigmas)
    export.write_report(out / "eoc.csv", study.report, kind="eoc_table")
    manifest["files"].append("eoc.csv")
    manifest["derived"]["errors"] = study.report.errors["1"]
    manifest["derived"]["eoc"] = study.report.eoc["1"]
    return EXIT_OK


def _run_compare(sc: Scenario, out: Path, manifest: dict, workers: int) -> int:
    study = experiments.particle_vs_macro(
        sc.initial(), sc.eta, sc.particle_counts, sc.M, b=sc.b, epsilon=sc.epsilon, dx=sc.dx,
        dt=sc.dt, horizon=sc.horizon, seed=sc.seed, safety=sc.safety,
        n_snapshots=sc.n_snapshots, workers=workers, pad_sigmas=sc.pad_sigmas)
    export.write_report(out / "compare.csv", study.report, kind="particle_vs_grid")
    export.write_snapshots(out / "snapshots.csv", study.macro.snapshots)
    manifest["files"] += ["compare.csv", "snapshots.csv"]
    manifest["derived"]["errors"] = study.report.errors
    return EXIT_OK


def run(path, output=None, seed=None, workers: int = 1) -> int:
    try:
        sc = load_scenario(path)
        if seed is not None:
            sc.seed = seed
        if output is not None:
            sc.output = str(output)
        sc.validate()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(sc.output)
    out.mkdir(parents=True, exist_ok=True)
    initial = sc.initial()
    sup = density_sup_norm(initial)
    a = 2.0 * sc.b * sup * sc.eta
    manifest = {
        "version": __version__,
        "mode": sc.mode,
        "seed": sc.seed,
        "a": a,
        "initial_sup_norm": sup,
        "resolved_config": "resolved.cfg",
        "derived": {},
        "files": [],
    }
    (out / "resolved.cfg").write_text(sc.to_text())
    try:
        if sc.mode == "bound":
            status = _run_bound(sc, out, manifest)
        elif sc.mode == "particle":
            status = _run_particle(sc, out, manifest, workers)
        elif sc.mode == "macro":
            status = _run_macro(sc, out, manifest)
        elif sc.mode == "eoc":
            status = _run_eoc(sc, out, manifest)
        else:
            status = _run_compare(sc, out, manifest, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.exception("run failed")
        manifest["error"] = repr(exc)
        status = EXIT_RUNTIME
    manifest["exit_status"] = status
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return status


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="diffagg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("file")
    p.add_argument("--workers", type=int, default=1, help="replica-level worker threads")
    p.add_argument("--output", help="output directory (overrides the file)")
    p.add_argument("--seed", type=int, help="random seed (overrides the file)")
    p.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    return run(args.file, output=args.output, seed=args.seed, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
