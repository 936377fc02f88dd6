"""Experiment drivers: MET sweeps, scan grids, speedup accounting."""

import numpy as np
import pytest

from pulseprep.device import load_device
from pulseprep.experiments import (
    MetAttempt,
    MetResult,
    ScanGrid,
    coupling_scan,
    find_met,
    met_monotone_decreasing,
    repeated_met,
    speedup_report,
    variance_scan,
)
from pulseprep.schwinger import SchwingerParams, build_schwinger


def falcon(n=2, levels=2):
    return load_device("falcon4q_nn").restrict(n, levels=levels)


def ham(n=2):
    return build_schwinger(SchwingerParams(n, spacing=0.1))


# -- result containers -------------------------------------------------------


def att(T, conv, de=1e-2):
    return MetAttempt(T, de if not conv else 1e-8, 1, conv)


def test_met_result_validation():
    with pytest.raises(ValueError):
        MetResult(None, 0.5, 1e-3, [att(12.0, False), att(11.0, False)])
    with pytest.raises(ValueError):
        MetResult(11.0, 0.5, 1e-3, [att(11.0, False), att(12.0, True)])
    ok = MetResult(12.0, 0.5, 1e-3, [att(11.0, False), att(12.0, True)])
    assert ok.found
    assert not MetResult(None, 0.5, 1e-3, [att(11.0, False)]).found


def test_met_attempt_leakage_defaults_to_none():
    assert att(10.0, True).leakage is None


# -- MET sweep ---------------------------------------------------------------


def test_find_met_validates_window_and_resolution():
    with pytest.raises(ValueError):
        find_met(falcon(), ham(), "01", t_min=50.0, t_max=50.0)
    with pytest.raises(ValueError):
        find_met(falcon(), ham(), "01", resolution=0.01)  # device is 0.1 ns


def test_find_met_none_when_nothing_converges():
    seen = []
    res = find_met(falcon(), ham(), "01", t_min=10.0, t_max=11.0,
                   resolution=0.5, restarts=1, maxiter=3,
                   progress=seen.append)
    assert res.met is None and not res.found
    assert [a.duration for a in res.attempts] == [10.0, 10.5, 11.0]
    assert seen == res.attempts
    assert all(not a.converged for a in res.attempts)


def test_find_met_stops_at_first_converged_duration():
    # Generous window: the very first duration converges, so the sweep
    # reports met = t_min and never tries the rest of the grid.
    res = find_met(falcon(), ham(), "01", t_min=48.0, t_max=60.0,
                   resolution=0.5, restarts=4, n_segments=96)
    assert res.found and res.met == 48.0
    assert len(res.attempts) == 1
    assert res.attempts[0].converged
    assert res.attempts[0].best_delta_e <= 1e-3


def test_repeated_met_aggregates_seed_streams():
    res = repeated_met(falcon(), ham(), "01", repeats=2, t_min=48.0,
                       t_max=52.0, resolution=0.5, restarts=4, n_segments=96)
    assert res.found and res.met == 48.0
    assert res.sem == 0.0  # both repeats find the same duration


def test_repeated_met_all_failures_keeps_none():
    res = repeated_met(falcon(), ham(), "01", repeats=2, t_min=10.0,
                       t_max=10.5, resolution=0.5, restarts=1, maxiter=3)
    assert not res.found and res.sem is None


# -- scan grid ---------------------------------------------------------------


def test_scan_grid_completeness():
    grid = ScanGrid(axes={"a": (1, 2), "b": (3,)})
    grid.cells[(1, 3)] = {"v": 10}
    with pytest.raises(ValueError):
        grid.validate()
    grid.cells[(2, 3)] = {"v": 20}
    grid.validate()
    assert grid.column("v") == {(1, 3): 10, (2, 3): 20}


def hand_grid(mets):
    grid = ScanGrid(axes={"coupling": tuple(range(len(mets)))})
    for g, m in enumerate(mets):
        grid.cells[(g,)] = {"met": m, "met_err": 0.5, "sem": 0.0,
                            "resolution": 0.5}
    return grid


def test_met_monotone_decreasing_on_hand_grids():
    assert met_monotone_decreasing(hand_grid([100.0, 80.0, 80.0, 60.0]))
    assert not met_monotone_decreasing(hand_grid([100.0, 120.0]))
    assert met_monotone_decreasing(hand_grid([100.0, 100.4]), slack=0.5)
    assert not met_monotone_decreasing(hand_grid([100.0, None]))


def test_coupling_scan_single_point():
    spec = falcon()
    g0 = spec.couplings[0][2]
    grid = coupling_scan(spec, ham(), [g0], "01", repeats=1, workers=1,
                         t_min=48.0, t_max=52.0, resolution=0.5,
                         restarts=4, n_segments=96)
    grid.validate()
    cell = grid.cells[(g0,)]
    assert cell["met"] == 48.0
    # repeats=1 has no spread: the error is the sweep resolution alone.
    assert cell["met_err"] == pytest.approx(0.5)


# -- variance scan -----------------------------------------------------------


def test_variance_scan_grid_and_determinism():
    spec = load_device("falcon4q_nn").with_levels(2)
    build = lambda n: build_schwinger(SchwingerParams(n, spacing=0.1))
    grid = variance_scan(spec, build, durations=(10.0, 20.0),
                         site_counts=(2, 3), samples=15)
    grid.validate()
    assert len(grid.cells) == 4
    for cell in grid.cells.values():
        assert cell["variance"] > 0.0
    again = variance_scan(spec, build, durations=(10.0, 20.0),
                          site_counts=(2, 3), samples=15)
    assert grid.column("variance") == again.column("variance")
    assert grid.cells[(10.0, 3)]["n_params"] == 3 * 101


def test_variance_scan_reduces_segments_to_resolution():
    spec = load_device("ibm_kyoto")  # 1 ns resolution
    build = lambda n: build_schwinger(SchwingerParams(n, spacing=0.5))
    grid = variance_scan(spec, build, durations=(10.0,), site_counts=(2,),
                         samples=5, levels=2)
    assert grid.cells[(10.0, 2)]["n_params"] == 2 * 11


def test_variance_scan_rejects_oversized_lattice():
    spec = falcon(2)
    build = lambda n: build_schwinger(SchwingerParams(n, spacing=0.1))
    with pytest.raises(ValueError):
        variance_scan(spec, build, durations=(10.0,), site_counts=(3,),
                      samples=2)


# -- speedup report ----------------------------------------------------------


def test_speedup_report_arithmetic():
    rep = speedup_report(124.0, "010", {"product_formula": 4994.0})
    assert rep.prep_ns == 71.0
    assert rep.total_ns == 195.0
    row = rep.rows[0]
    assert row.baseline == "product_formula"
    assert row.ratio_with_prep == pytest.approx(4994.0 / 195.0)
    assert row.ratio_pulse_only == pytest.approx(4994.0 / 124.0)


def test_speedup_report_requires_baselines():
    with pytest.raises(ValueError):
        speedup_report(100.0, "01", {})
