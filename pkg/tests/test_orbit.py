import math

import numpy as np
import pytest

from nrho_hover.constants import NRHO_PERIOD
from nrho_hover.dynamics import jacobi_constant
from nrho_hover.errors import HoverError, SpectrumError
from nrho_hover.orbit import (
    PeriodicOrbit,
    closure_norm,
    monodromy,
    refine_nrho,
    spectrum,
    nominal_nrho,
    unit_eigenvector,
)
from nrho_hover.propagation import OMEGA, propagate


def test_published_initial_state():
    o = nominal_nrho()
    assert (o.x0, o.z0, o.v0) == (0.987581435006489, 0.005276210630165, 2.120240531159090)
    assert o.period == 4 * math.pi / 9
    assert not o.refined


def test_published_state_is_nearly_periodic():
    assert closure_norm(nominal_nrho()) < 1e-9


def test_refinement(orbit):
    guess = nominal_nrho()
    assert orbit.refined
    assert orbit.iterations <= 5
    assert orbit.closure_norm < 1e-10
    assert np.max(np.abs(orbit.initial_state - guess.initial_state)) < 1e-9
    assert orbit.period == NRHO_PERIOD


def test_refinement_is_idempotent(orbit):
    again = refine_nrho(orbit)
    assert again.iterations <= 1
    np.testing.assert_allclose(again.initial_state, orbit.initial_state, atol=1e-12, rtol=0)


def test_refined_orbit_conserves_jacobi(orbit):
    traj = propagate(orbit.initial_state, 0.0, orbit.period, n_samples=100)
    C = [jacobi_constant(s) for s in traj.states]
    assert np.ptp(C) < 1e-11


def test_refinement_gives_up_on_bad_guess():
    far = PeriodicOrbit.from_xzv(0.9, 0.2, 0.1)
    with pytest.raises(HoverError):
        refine_nrho(far)


def test_periodic_orbit_validates_symmetric_state():
    with pytest.raises(ValueError):
        PeriodicOrbit(np.array([1.0, 0.1, 0.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        PeriodicOrbit(np.zeros(5))


def test_orbit_dict_round_trip(orbit):
    back = PeriodicOrbit.from_dict(orbit.to_dict())
    np.testing.assert_array_equal(back.initial_state, orbit.initial_state)
    assert back.refined and back.period == orbit.period
    assert back.to_dict() == orbit.to_dict()


def test_monodromy_requires_refined_orbit():
    with pytest.raises(ValueError):
        monodromy(nominal_nrho())


def test_monodromy_structure(mono):
    assert abs(np.linalg.det(mono) - 1.0) < 1e-6
    defect = mono.T @ OMEGA @ mono - OMEGA
    assert np.max(np.abs(defect)) < 1e-6 * np.linalg.norm(mono) ** 2


def test_symmetric_and_direct_monodromy_agree(orbit, mono):
    direct = monodromy(orbit, method="direct")
    assert np.linalg.norm(direct - mono) / np.linalg.norm(mono) < 1e-6


def test_monodromy_is_a_copy(orbit):
    a = monodromy(orbit)
    a[0, 0] = 1e9
    assert monodromy(orbit)[0, 0] != 1e9


def test_spectrum_pairs(mono):
    s = spectrum(mono)
    assert s.reciprocal_defect < 1e-6
    assert s.unit_distance < 1e-3
    assert s.conjugate_defect < 1e-8
    a, b = s.pair_values(s.conjugate_pair)
    assert abs(a) == pytest.approx(1.0, abs=1e-6)
    assert sorted(s.reciprocal_pair + s.unit_pair + s.conjugate_pair) == list(range(6))
    mods = np.abs(s.eigenvalues)
    assert np.all(np.diff(np.round(mods, 9)) <= 0)


def _synthetic(lam, theta, rng):
    B = np.zeros((6, 6))
    B[0, 0], B[1, 1] = lam, 1 / lam
    B[2:4, 2:4] = [[1.0, 1e-7], [0.0, 1.0]]
    c, s = math.cos(theta), math.sin(theta)
    B[4:6, 4:6] = [[c, -s], [s, c]]
    S = rng.normal(size=(6, 6)) + 3 * np.eye(6)
    return S @ B @ np.linalg.inv(S), S


def test_spectrum_of_similar_matrix(rng):
    M, _ = _synthetic(40.0, 0.7, rng)
    s = spectrum(M)
    recip = sorted(abs(v) for v in s.pair_values(s.reciprocal_pair))
    np.testing.assert_allclose(recip, [1 / 40.0, 40.0], rtol=1e-8)
    assert s.unit_distance < 1e-6
    angles = sorted(np.angle(s.pair_values(s.conjugate_pair)))
    np.testing.assert_allclose(angles, [-0.7, 0.7], atol=1e-8)


def test_spectrum_of_identity():
    s = spectrum(np.eye(6))
    np.testing.assert_allclose(s.eigenvalues, np.ones(6))
    assert s.unit_distance == 0.0


def test_spectrum_rejects_bad_input():
    with pytest.raises(SpectrumError):
        spectrum(np.eye(5))
    bad = np.eye(6)
    bad[2, 3] = np.inf
    with pytest.raises(SpectrumError):
        spectrum(bad)


def test_spectrum_dict(mono):
    d = spectrum(mono).to_dict()
    assert len(d["eigenvalues"]) == 6
    assert set(d) >= {"reciprocal_defect", "unit_distance", "conjugate_defect"}


def test_unit_eigenvector(mono):
    e = unit_eigenvector(mono)
    assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-14)
    assert e[np.flatnonzero(np.abs(e) > 1e-14)[0]] > 0
    # M e = e up to the splitting of the double unit eigenvalue
    assert np.linalg.norm(mono @ e - e) < 1e-2


def test_unit_eigenvector_is_the_orbit_tangent(orbit, mono):
    from nrho_hover.dynamics import eom_derivative

    f = eom_derivative(orbit.initial_state)
    f /= np.linalg.norm(f)
    e = unit_eigenvector(mono)
    assert min(np.linalg.norm(e - f), np.linalg.norm(e + f)) < 1e-2


def test_unit_eigenvector_requires_unit_eigenvalue():
    with pytest.raises(SpectrumError):
        unit_eigenvector(np.diag([2.0, 0.5, 3.0, 1 / 3, 4.0, 0.25]))
