import math

import numpy as np
import pytest

from nrho_hover.analysis import (
    DESIGNED,
    RESET,
    compare_models,
    dv_vs_rho,
    linear_impulse_matrix,
    simulate_hover,
)
from nrho_hover.constants import lu_to_km
from nrho_hover.continuation import ContinuationConfig, continue_family
from nrho_hover.design import RevisitSpec, linear_impulse, linear_velocity_guess
from nrho_hover.relative import linear_map, nonlinear_relative


@pytest.fixture(scope="module")
def report(min_spec, orbit):
    return compare_models(min_spec, 3, orbit)


def test_linear_map_is_matrix_product(rng):
    phi = rng.normal(size=(6, 6))
    dX = rng.normal(size=6)
    np.testing.assert_allclose(linear_map(dX, phi), phi @ dX)


def test_nonlinear_relative_tracks_linear_for_small_offsets(orbit):
    from nrho_hover.propagation import propagate_with_stm

    dX0 = np.array([1e-9, -2e-9, 1e-9, 0.0, 1e-9, 0.0])
    dt = 0.2
    _, phi = propagate_with_stm(orbit.initial_state, 0.0, dt)
    final, traj = nonlinear_relative(orbit.initial_state, dX0, dt, n_samples=5)
    np.testing.assert_allclose(final, linear_map(dX0, phi), rtol=1e-4, atol=1e-15)
    assert traj.states.shape == (7, 6)
    np.testing.assert_allclose(traj.states[0], dX0, atol=1e-18)


def test_chief_closure_replaces_chief_endpoint(orbit):
    dX0 = np.array([1e-6, 0, 0, 0, 0, 0])
    a, _ = nonlinear_relative(orbit.initial_state, dX0, orbit.period)
    b, _ = nonlinear_relative(orbit.initial_state, dX0, orbit.period, chief_closure=True)
    assert np.linalg.norm(a - b) < 1e-9
    c, traj = nonlinear_relative(orbit.initial_state, dX0, orbit.period, n_samples=3,
                                 chief_closure=True)
    np.testing.assert_array_equal(b, c)


def test_linear_impulse_matrix_matches_formula(mono, rng):
    L = linear_impulse_matrix(mono)
    for _ in range(3):
        dr = rng.normal(size=3) * 1e-6
        expected = linear_impulse(dr, linear_velocity_guess(dr, mono), mono)
        np.testing.assert_allclose(L @ dr, expected, rtol=1e-6, atol=1e-12)


def test_first_period_drift_is_design_residual(report):
    nl = report.nonlinear
    psi_km = lu_to_km(report.summary["design_residual_norm"])
    assert abs(nl.drift_km[0] - psi_km) < 1e-11


def test_linear_design_drifts_more(report):
    assert report.summary["linear_dominates_every_period"]
    assert report.summary["max_drift_ratio"] > 10
    assert len(report.linear) == len(report.nonlinear) == 3
    assert report.linear.complete and report.nonlinear.complete


def test_report_rows(report):
    rows = list(report.rows())
    assert [r[0] for r in rows] == [1, 2, 3]
    np.testing.assert_allclose([r[1] for r in rows], np.arange(1, 4) * 4 * math.pi / 9)
    assert rows[0][5] == pytest.approx(report.summary["design_dv_mps"], rel=1e-12)


def test_designed_law_repeats_the_design_impulse(report):
    imps = report.nonlinear.impulses
    for v in imps[1:]:
        np.testing.assert_array_equal(v, imps[0])


def test_reset_law_restores_design_velocity(min_spec, orbit, min_solution):
    rec = simulate_hover(min_spec, min_solution.dv0, 2, orbit, law=RESET)
    assert len(rec) == 2
    # after the first revisit the reset impulse equals the design impulse
    np.testing.assert_allclose(rec.impulses[0], min_solution.impulse_vec, rtol=1e-9, atol=1e-18)


def test_hover_samples(min_spec, orbit, min_solution):
    rec = simulate_hover(min_spec, min_solution.dv0, 2, orbit, n_samples=4)
    assert len(rec.samples) == 2 * 5
    t = [s[0] for s in rec.samples]
    assert t == sorted(t)


def test_hover_argument_checks(min_spec, orbit, min_solution):
    with pytest.raises(ValueError):
        simulate_hover(min_spec, min_solution.dv0, 0, orbit)
    with pytest.raises(ValueError):
        simulate_hover(min_spec, min_solution.dv0, 1, orbit, law="sometimes")
    assert DESIGNED != RESET


def test_dv_vs_rho(orbit, min_solution):
    fam = continue_family(min_solution, 1.2, ContinuationConfig(), orbit)
    rows = dv_vs_rho(fam, orbit)
    assert [r["rho_km"] for r in rows] == pytest.approx([1.0, 1.1, 1.2])
    ratio = [r["dv_linear_mps"] / r["rho_km"] for r in rows]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)
    assert rows[0]["anchored_rel_deviation"] == 0.0
    assert rows[2]["anchored_rel_deviation"] > rows[1]["anchored_rel_deviation"]
    for r in rows:
        assert r["deviation_mps"] == pytest.approx(r["dv_mps"] - r["dv_linear_mps"])


def test_dv_vs_rho_off_orbit_direction_is_linear(orbit, mono):
    # off the orbit tangent the linear impulse is substantial and scales with rho
    L = linear_impulse_matrix(mono)
    a = np.linalg.norm(L @ RevisitSpec(1.0, 0.3, 1.0).position)
    b = np.linalg.norm(L @ RevisitSpec(4.0, 0.3, 1.0).position)
    assert b == pytest.approx(4 * a, rel=1e-12)
    assert a > 1e-6
