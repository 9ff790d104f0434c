import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from nrho_hover.constants import (
    EARTH_MOON,
    NRHO_PERIOD,
    convert_units,
    km_to_lu,
    lu_to_km,
    vel_to_mps,
)
from nrho_hover.dynamics import (
    MIRROR_XZ,
    MU,
    as_state,
    eom_derivative,
    eom_jacobian,
    jacobi_constant,
    stm_derivative,
)
from nrho_hover.errors import SingularityError

# Jacobi constant at (0.5, 0, 0, 0, 0, 0), evaluated by hand:
# x^2 + 2(1-mu)/(0.5+mu) + 2mu/(0.5-mu) + mu(1-mu)
JACOBI_HALF = 4.169467475513766


# --------------------------------------------------------------- constants


def test_derived_units():
    c = EARTH_MOON
    assert c.VU == pytest.approx(1.023232811, rel=1e-9)
    assert c.T_EM == pytest.approx(2 * math.pi * 375676.968, rel=1e-15)
    assert km_to_lu(1.0) == pytest.approx(2.6014229783691678e-6, rel=1e-14)


def test_tabulated_earth_moon_period_is_a_transposition():
    # the tabulated value matches 2 pi with the TU digits 7 and 5 swapped
    assert 2 * math.pi * 357676.968 == pytest.approx(2.24735067e6, rel=1e-8)
    assert EARTH_MOON.T_EM != pytest.approx(2.24735067e6, rel=1e-3)


def test_nrho_period_is_nine_two_resonant():
    assert 9 * NRHO_PERIOD == pytest.approx(2 * 2 * math.pi)


@given(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.sampled_from(["length", "velocity", "time"]),
)
def test_unit_round_trip(value, kind):
    there = convert_units(value, kind, "to-dimensional")
    back = convert_units(there, kind, "to-nondimensional")
    assert back == pytest.approx(value, rel=1e-14, abs=1e-300)


def test_unit_conversion_rejects_bad_arguments():
    with pytest.raises(ValueError):
        convert_units(1.0, "mass", "to-dimensional")
    with pytest.raises(ValueError):
        convert_units(1.0, "length", "sideways")


def test_km_lu_inverse_and_velocity():
    assert lu_to_km(km_to_lu(1234.5)) == pytest.approx(1234.5, rel=1e-15)
    assert vel_to_mps(1.0) == pytest.approx(1023.232811, rel=1e-9)


# --------------------------------------------------------------- dynamics


def _collinear_force(x, mu=MU):
    return x - (1 - mu) * (x + mu) / abs(x + mu) ** 3 - mu * (x - 1 + mu) / abs(x - 1 + mu) ** 3


def test_l1_is_an_equilibrium():
    xl1 = brentq(_collinear_force, 0.5, 1 - MU - 1e-3, xtol=1e-15)
    assert xl1 == pytest.approx(0.836915, abs=1e-6)
    d = eom_derivative(np.array([xl1, 0, 0, 0, 0, 0.0]))
    assert np.max(np.abs(d)) < 1e-12


def test_jacobi_hand_value():
    assert jacobi_constant(np.array([0.5, 0, 0, 0, 0, 0.0])) == pytest.approx(JACOBI_HALF, abs=1e-13)


def test_jacobi_velocity_dependence():
    X = np.array([0.5, 0, 0, 0.1, 0.2, 0.3])
    assert jacobi_constant(X) == pytest.approx(JACOBI_HALF - 0.14, abs=1e-13)


def test_singularity_at_primaries():
    with pytest.raises(SingularityError):
        eom_derivative(np.array([-MU, 0, 0, 0, 0, 0.0]))
    with pytest.raises(SingularityError):
        eom_derivative(np.array([1 - MU, 0, 0, 0, 0, 0.0]))


def test_rejects_malformed_state():
    with pytest.raises(ValueError):
        as_state(np.zeros(5))
    with pytest.raises(ValueError):
        as_state([np.nan, 0, 0, 0, 0, 0])
    assert as_state([1, 0, 0, 0, 0, 0]).dtype == np.float64


_coord = st.floats(-1.5, 1.5, allow_nan=False)
_speed = st.floats(-2.0, 2.0, allow_nan=False)


def _away_from_primaries(X):
    return min(np.linalg.norm(X[:3] - [-MU, 0, 0]), np.linalg.norm(X[:3] - [1 - MU, 0, 0])) > 0.05


states = st.tuples(_coord, _coord, _coord, _speed, _speed, _speed).map(np.array).filter(
    _away_from_primaries
)


@settings(max_examples=100, deadline=None)
@given(states)
def test_jacobian_matches_finite_differences(X):
    h = 1e-7
    A = eom_jacobian(X)
    fd = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        fd[:, k] = (eom_derivative(X + e) - eom_derivative(X - e)) / (2 * h)
    assert np.max(np.abs(A - fd)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(states)
def test_stm_derivative_is_jacobian_product(X):
    phi = np.random.default_rng(1).normal(size=(6, 6))
    dX, dphi = stm_derivative(X, phi)
    np.testing.assert_allclose(dX, eom_derivative(X), rtol=0, atol=0)
    np.testing.assert_allclose(dphi, eom_jacobian(X) @ phi, rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(states)
def test_mirror_symmetry_of_vector_field(X):
    # (y, u, w, t) -> (-y, -u, -w, -t) maps solutions onto solutions, so the
    # field obeys f(G X) = -G f(X)
    G = MIRROR_XZ
    np.testing.assert_allclose(eom_derivative(G @ X), -G @ eom_derivative(X), atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(states)
def test_jacobi_is_a_first_integral(X):
    # dC/dt = grad C . f = 0 pointwise
    h = 1e-6
    grad = np.array(
        [
            (jacobi_constant(X + h * e) - jacobi_constant(X - h * e)) / (2 * h)
            for e in np.eye(6)
        ]
    )
    f = eom_derivative(X)
    assert abs(grad @ f) < 1e-6 * max(1.0, np.linalg.norm(grad) * np.linalg.norm(f))
