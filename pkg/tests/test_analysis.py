import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffagg import DomainError
from diffagg.analysis import (
    CoverageWarning,
    ErrorReport,
    density_histogram,
    eoc,
    error_norms,
    mass,
    restrict,
    running_supremum,
)
from diffagg.macro import Grid, GridDensity


def test_histogram_single_cell():
    g = Grid(0.0, 0.25, 8)
    samples = np.full((3, 5), 0.3)
    h = density_histogram(samples, g)
    assert h.values[1] == pytest.approx(4.0) and np.count_nonzero(h.values) == 1


def test_histogram_half_open_bins():
    g = Grid(0.0, 0.5, 4)
    h = density_histogram([0.5, 0.0, 1.999999], g)
    assert h.values.tolist() == pytest.approx([2 / 3, 2 / 3, 0.0, 2 / 3])


def test_histogram_mass_one(rng):
    g = Grid(-5.0, 0.1, 100)
    h = density_histogram(rng.normal(size=(7, 300)), g)
    assert mass(h) == pytest.approx(1.0, abs=1e-13)


def test_histogram_uniform(rng):
    g = Grid(0.0, 0.1, 10)
    n = 10**6
    h = density_histogram(rng.uniform(0, 1, n), g)
    sigma = math.sqrt(0.1 * 0.9 / n) / 0.1
    assert np.all(np.abs(h.values - 1.0) < 4 * sigma)


def test_histogram_reports_outside():
    g = Grid(0.0, 1.0, 3)
    with pytest.warns(CoverageWarning, match="2 of 5"):
        h = density_histogram([-0.5, 0.5, 1.5, 2.5, 3.0], g)
    assert mass(h) == pytest.approx(0.6)


def series(values_list, dx=1.0):
    g = Grid(0.0, dx, len(values_list[0]))
    return [GridDensity(g, np.asarray(v, dtype=float), float(k)) for k, v in enumerate(values_list)]


def test_error_norms_basic():
    u = series([[1.0, 2.0, 0.0], [0.0, 0.5, 1.0]])
    assert error_norms(u, u, 1) == 0.0
    g = Grid(0.0, 0.25, 3)
    a = [GridDensity(g, [0.0, 0.5, 0.0])]
    b = [GridDensity(g, [0.0, 0.0, 0.0])]
    assert error_norms(a, b, 1) == pytest.approx(0.125)
    assert error_norms(series([[3.0, 4.0, 0.0]]), series([[0.0, 0.0, 0.0]]), 2) == pytest.approx(5.0)
    assert error_norms(series([[3.0, -4.0, 1.0]]), series([[0.0, 0.0, 0.0]]), math.inf) == 4.0


def test_error_norms_takes_max_over_time():
    u = series([[1.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    v = series([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert error_norms(u, v, 1) == 3.0


def test_error_norms_mismatch():
    with pytest.raises(DomainError):
        error_norms(series([[1.0, 2.0, 3.0]]), series([[1.0, 2.0, 3.0]], dx=0.5), 1)
    a = series([[1.0, 2.0, 3.0]])
    b = [GridDensity(a[0].grid, a[0].values, 5.0)]
    with pytest.raises(DomainError):
        error_norms(a, b, 1)


def test_norm_ordering(rng):
    g = Grid(0.0, 0.1, 50)
    for _ in range(20):
        u = [GridDensity(g, rng.normal(size=50))]
        v = [GridDensity(g, rng.normal(size=50))]
        inf = error_norms(u, v, math.inf)
        assert error_norms(u, v, 1) <= g.length * inf + 1e-15
        assert error_norms(u, v, 2) <= math.sqrt(g.length) * inf + 1e-15


def test_eoc_values():
    assert eoc([1.0, 0.5, 0.25]) == [1.0, 1.0]
    assert eoc([1.0, 0.25, 0.0625]) == [2.0, 2.0]
    with pytest.raises(DomainError):
        eoc([1.0, 0.0])


# published error columns and orders of the grid-refinement table
CASE1 = [23.745e-3, 12.298e-3, 6.235e-3, 3.501e-3, 1.659e-3, 0.741e-3, 0.270e-3]
CASE1_EOC = [0.949, 0.980, 0.833, 1.078, 1.162, 1.458]
CASE2 = [48.652e-3, 26.969e-3, 14.211e-3, 7.479e-3, 3.081e-3, 1.211e-3, 0.400e-3]
CASE2_EOC = [0.851, 0.924, 0.926, 1.280, 1.346, 1.600]


def test_eoc_first_published_pair():
    assert eoc(CASE1[:2]) == [pytest.approx(0.949, abs=5e-4)]


@pytest.mark.parametrize("errs,orders", [(CASE1, CASE1_EOC), (CASE2, CASE2_EOC)])
def test_eoc_consistent_with_rounded_errors(errs, orders):
    # the published errors carry +-5e-7 rounding; every published order must be
    # reachable from some errors inside those rounding intervals
    half = 0.5e-6
    for k, order in enumerate(orders):
        lo = eoc([errs[k] - half, errs[k + 1] + half])[0]
        hi = eoc([errs[k] + half, errs[k + 1] - half])[0]
        assert lo - 5e-4 <= order <= hi + 5e-4
        assert lo <= eoc(errs)[k] <= hi


@given(st.floats(1.01, 100), st.floats(1e-6, 1e3), st.integers(2, 10))
def test_eoc_geometric(r, e0, n):
    errs = [e0 / r**k for k in range(n)]
    assert eoc(errs) == pytest.approx([math.log2(r)] * (n - 1), rel=1e-12)


def test_running_supremum():
    assert running_supremum([1.0, 1.0, 1.0]).tolist() == [1.0, 1.0, 1.0]
    assert running_supremum([3.0, 2.0, 1.0]).tolist() == [3.0, 3.0, 3.0]
    s = running_supremum(series([[0.0, 1.0, 0.0], [2.0, 0.0, 0.0], [0.5, 0.5, 0.5]]))
    assert s.tolist() == [1.0, 2.0, 2.0]


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50))
def test_running_supremum_monotone(vals):
    assert np.all(np.diff(running_supremum(vals)) >= 0)


def test_restrict():
    fine = GridDensity(Grid(0.0, 0.5, 6), [1.0, 3.0, 0.0, 0.0, 5.0, 5.0])
    assert restrict(fine, Grid(0.0, 1.0, 3)).values.tolist() == [2.0, 0.0, 5.0]
    const = GridDensity(Grid(-2.0, 0.125, 64), np.full(64, 7.0))
    assert np.all(restrict(const, Grid(-2.0, 0.5, 16)).values == 7.0)


def test_restrict_preserves_mass(rng):
    fine = GridDensity(Grid(-4.0, 2.0**-6, 512), rng.uniform(size=512))
    coarse = restrict(fine, Grid(-4.0, 2.0**-2, 32))
    assert mass(coarse) == pytest.approx(mass(fine), abs=1e-14)
    shifted = restrict(fine, Grid(-3.0, 2.0**-2, 8))
    assert shifted.values[0] == pytest.approx(fine.values[64:80].mean())


def test_restrict_misaligned():
    fine = GridDensity(Grid(0.0, 0.3, 10), np.ones(10))
    with pytest.raises(DomainError):
        restrict(fine, Grid(0.0, 0.5, 3))
    with pytest.raises(DomainError):
        restrict(fine, Grid(0.1, 0.6, 3))
    with pytest.raises(DomainError):
        restrict(fine, Grid(0.0, 0.6, 6))


def test_mass():
    assert mass(GridDensity(Grid(0.0, 1.0, 4), np.zeros(4))) == 0.0


def test_error_report_rows():
    rep = ErrorReport(["2^-1", "2^-2"], {"1": [0.2, 0.1]}, label_name="dx")
    rows = list(rep.rows())
    assert rows[0] == ["dx", "err_1", "eoc_1"]
    assert rows[1] == ["2^-1", 0.2, ""]
    assert rows[2][2] == pytest.approx(1.0)
