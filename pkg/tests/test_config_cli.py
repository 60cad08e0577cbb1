import json
import math
from pathlib import Path

import numpy as np
import pytest

from diffagg import cli
from diffagg.config import ConfigParseError, load_scenario, parse_scenario
from diffagg.export import read_csv
from diffagg.sampling import preset


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    return cli.main(["run", str(cfg), "--output", str(out), *extra]), out


# -- parsing ----------------------------------------------------------------

def test_parse_preset_and_lists():
    sc = parse_scenario("mode = eoc\npreset = initial2\nlevels = 1, 2,3\neta=0.5  # c\n")
    assert sc.mode == "eoc" and sc.levels == (1, 2, 3) and sc.eta == 0.5
    assert sc.initial().alphas.tolist() == preset("initial2").alphas.tolist()


def test_parse_component_blocks():
    sc = parse_scenario("mode=macro\n[component]\nalpha=0.5\nT=1\nx0=-3\n[component]\nalpha=0.5\nT=1\nbeta=2\nx0=3\n")
    dens = sc.initial()
    assert len(dens.components) == 2
    assert dens.components[1].beta == 2 and dens.components[0].x0 == -3


@pytest.mark.parametrize("text,line,key", [
    ("mode = macro\nbogus = 1\n", 2, "bogus"),
    ("eta = fast\n", 1, "eta"),
    ("mode = macro\nmode = eoc\n", 2, "mode"),
    ("no equals sign here\n", 1, None),
    ("preset=initial1\n[component]\nalpha=1\n", None, "T"),
])
def test_parse_errors_name_line_and_field(text, line, key):
    with pytest.raises(ConfigParseError) as info:
        parse_scenario(text)
    if line is not None:
        assert info.value.line == line
        assert f"line {line}" in str(info.value)
    if key is not None:
        assert key in str(info.value)


def test_resolved_text_reparses_to_same_scenario():
    sc = parse_scenario("mode=compare\npreset=initial1\neta=1.5\nparticle_counts=10,20\nM=3\n")
    again = parse_scenario(sc.to_text())
    assert again.to_text() == sc.to_text()
    assert again.preset is None  # preset is expanded into explicit blocks
    assert np.array_equal(again.initial().alphas, sc.initial().alphas)


# -- exit codes -------------------------------------------------------------

def test_parse_error_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "mode = macro\npreset = initial1\nwat = 3\n")
    assert code == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 3" in err and "wat" in err


def test_alpha_sum_violation_exits_2(tmp_path, capsys):
    text = "mode=macro\n" + "".join(
        f"[component]\nalpha={al}\nT=2\nx0={x}\n" for al, x in ((0.25, -10), (0.4, 0), (0.25, 10)))
    code, _ = run(tmp_path, text)
    assert code == cli.EXIT_CONFIG
    assert "sum(alpha) = 1" in capsys.readouterr().err


@pytest.mark.parametrize("line,needle", [
    ("eta = -1", "eta"),
    ("safety = 1.5", "safety"),
    ("M = 0", "M"),
    ("mode = plot", "mode"),
])
def test_invariant_violations_exit_2(tmp_path, capsys, line, needle):
    code, _ = run(tmp_path, f"preset=initial1\n{line}\n")
    assert code == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.cfg")]) == cli.EXIT_CONFIG


# -- bound mode -------------------------------------------------------------

def test_bound_manifest_records_both_counts(tmp_path):
    code, out = run(tmp_path, "mode=bound\npreset=initial1\nepsilon=1.5\nhorizon=7\nb=1\nthreshold=0.3\n")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["derived"]["min_particle_count"] == 511
    assert man["derived"]["published_particle_count"] == 555
    assert man["derived"]["bound_at_min_N"] <= 0.3
    assert man["exit_status"] == 0
    kind, header, rows = read_csv(out / "bound.csv")
    assert kind == "bound" and header[-2:] == ["min_particle_count", "published_particle_count"]


def test_manifest_records_derived_a(tmp_path):
    _, out = run(tmp_path, "mode=bound\npreset=initial1\neta=0.75\nb=2\n")
    man = json.loads((out / "manifest.json").read_text())
    sup = math.sqrt(3) / 8 * 2 ** (-1 / 3) / 2
    assert man["initial_sup_norm"] == pytest.approx(sup, rel=1e-12)
    assert man["a"] == pytest.approx(2 * 2 * sup * 0.75, rel=1e-12)


# -- grid runs --------------------------------------------------------------

def test_eoc_mode_writes_table(tmp_path):
    code, out = run(tmp_path, "mode=eoc\npreset=initial1\neta=1\nlevels=1,2\nreference_level=3\nhorizon=1\n")
    assert code == 0
    kind, header, rows = read_csv(out / "eoc.csv")
    assert kind == "eoc_table"
    assert header == ["dx", "err_1", "eoc_1"]
    assert [r[0] for r in rows] == ["2^-1", "2^-2"]
    assert rows[0][2] == "" and float(rows[1][2]) == pytest.approx(
        math.log2(float(rows[0][1]) / float(rows[1][1])))


def test_csv_header_is_versioned(tmp_path):
    _, out = run(tmp_path, "mode=macro\npreset=initial1\nhorizon=0.5\ndx=0.25\n")
    first = (out / "snapshots.csv").read_text().splitlines()[0]
    assert first.startswith("# diffagg-csv v1 kind=")
    assert (out / "snapshots.csv").read_text().splitlines()[1] == "time,x_center,u"


def test_macro_blowup_exit_3_with_partial_output(tmp_path):
    # strong aggregation on a short window so detection is fast
    code, out = run(tmp_path, "mode=macro\npreset=initial2\neta=0.3\ndx=0.125\nhorizon=40\n"
                              "blowup_window=3000\n")
    assert code == cli.EXIT_BLOWUP
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_status"] == 3
    assert man["blowup"]["sup"] > man["blowup"]["threshold"] >= man["a"] / 2
    assert man["blowup"]["time"] < 40
    _, _, rows = read_csv(out / "running_sup.csv")
    assert rows and float(rows[-1][1]) > man["a"] / 2


@pytest.mark.parametrize("extra", ["eta=0", "b=0\neta=1"])
def test_degenerate_coefficients_run(tmp_path, extra):
    code, out = run(tmp_path, f"mode=macro\npreset=initial1\nhorizon=0.25\ndx=0.25\n{extra}\n")
    man = json.loads((out / "manifest.json").read_text())
    assert man["a"] == 0.0
    assert code in (0, 3)
    assert (out / "snapshots.csv").exists()


# -- reproducibility --------------------------------------------------------

PARTICLE = "mode=particle\npreset=initial1\neta=1\nN=20\nM=3\ndt=0.05\nhorizon=0.5\nseed=7\nwrite_trajectories=true\n"


def test_manifest_round_trip_is_byte_identical(tmp_path):
    code, out = run(tmp_path, PARTICLE)
    assert code == 0
    out2 = tmp_path / "again"
    assert cli.main(["run", str(out / "resolved.cfg"), "--output", str(out2)]) == 0
    for name in ("density.csv", "running_sup.csv", "trajectories.csv"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()


def test_workers_do_not_change_outputs(tmp_path):
    cfg = write(tmp_path, PARTICLE)
    a, b = tmp_path / "w1", tmp_path / "w3"
    assert cli.main(["run", str(cfg), "--output", str(a)]) == 0
    assert cli.main(["run", str(cfg), "--output", str(b), "--workers", "3"]) == 0
    for name in ("density.csv", "trajectories.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_overrides_file(tmp_path):
    cfg = write(tmp_path, PARTICLE)
    a, b = tmp_path / "s7", tmp_path / "s8"
    cli.main(["run", str(cfg), "--output", str(a)])
    cli.main(["run", str(cfg), "--output", str(b), "--seed", "8"])
    assert json.loads((b / "manifest.json").read_text())["seed"] == 8
    assert (a / "trajectories.csv").read_bytes() != (b / "trajectories.csv").read_bytes()


def test_trajectory_csv_columns(tmp_path):
    _, out = run(tmp_path, PARTICLE)
    kind, header, rows = read_csv(out / "trajectories.csv")
    assert header == ["replica", "time", "particle_index", "position"]
    # M replicas x (n_snapshots + 1) output times x N particles
    assert len(rows) == 3 * 9 * 20


SCENARIOS = sorted((Path(__file__).parent.parent / "scenarios").glob("*.cfg"))


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_bundled_scenarios_validate(path):
    sc = load_scenario(path)
    sc.validate()
    assert abs(sum(sc.initial().alphas) - 1.0) <= 1e-12
