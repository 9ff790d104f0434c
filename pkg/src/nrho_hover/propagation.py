"""Adaptive propagation of CR3BP states and of the coupled state + STM system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import EARTH_MOON
from .dynamics import MU, as_state, augmented_derivative
from .errors import PropagationError

# Surface radii in LU; crossing either ends the integration with an error.
MOON_RADIUS = EARTH_MOON.R_M / EARTH_MOON.LU
EARTH_RADIUS = EARTH_MOON.R_E / EARTH_MOON.LU

# Embedded Dormand-Prince 8(5,3); order >= 7 with a 7th-order dense interpolant.
METHOD = "DOP853"


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-13
    max_step: float | None = None

    def scaled(self, factor: float) -> "Tolerances":
        return Tolerances(self.abs_tol * factor, self.rel_tol * factor, self.max_step)

    def as_dict(self) -> dict:
        return {"abs_tol": self.abs_tol, "rel_tol": self.rel_tol, "max_step": self.max_step}


DEFAULT_TOL = Tolerances()


@dataclass
class Trajectory:
    """Sampled solution: ``epochs`` (n,) in TU and ``states`` (n, 6)."""

    epochs: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.epochs)


def _impact_events(mu):
    def moon(t, y):
        return (y[0] - 1.0 + mu) ** 2 + y[1] ** 2 + y[2] ** 2 - MOON_RADIUS**2

    def earth(t, y):
        return (y[0] + mu) ** 2 + y[1] ** 2 + y[2] ** 2 - EARTH_RADIUS**2

    moon.terminal = earth.terminal = True
    moon.direction = earth.direction = -1
    return [moon, earth]


def _solve(fun, y0, t0, tf, tol: Tolerances, dense: bool, mu: float = MU):
    kwargs = {}
    if tol.max_step is not None:
        kwargs["max_step"] = tol.max_step
    sol = solve_ivp(
        fun,
        (t0, tf),
        y0,
        method=METHOD,
        rtol=tol.rel_tol,
        atol=tol.abs_tol,
        dense_output=dense,
        events=_impact_events(mu),
        **kwargs,
    )
    if sol.status == 1:
        body = "Moon" if len(sol.t_events[0]) else "Earth"
        raise PropagationError(f"trajectory hits the {body} surface at t={sol.t[-1]:.6g}")
    if sol.status != 0:
        raise PropagationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol


def _check_span(t0, tf):
    if not (np.isfinite(t0) and np.isfinite(tf)):
        raise ValueError("non-finite time span")
    if tf < t0:
        raise ValueError(f"tf ({tf}) must not precede t0 ({t0})")


def _stm_rhs(mu):
    def rhs(t, y):
        return augmented_derivative(y, mu)

    return rhs


def _augmented(X0):
    return np.concatenate((X0, np.eye(6).ravel()))


def propagate(
    state,
    t0: float,
    tf: float,
    tol: Tolerances = DEFAULT_TOL,
    n_samples: int = 0,
    mu: float = MU,
) -> Trajectory:
    """Propagate a state from ``t0`` to ``tf``.

    The variational equations are carried along even though only the state is
    returned: step-size control on the STM components is what keeps the steps
    small enough through perilune, where local errors are amplified by up to
    ~1e6 over one NRHO period.  As a side effect the final state is bit-identical
    to the one from :func:`propagate_with_stm`.

    The returned trajectory holds ``n_samples`` evenly spaced interior points
    from the integrator's dense output plus both endpoints.  The final state is
    the integrator's own endpoint, so it does not depend on ``n_samples``.
    """
    X0 = as_state(state)
    _check_span(t0, tf)
    if tf == t0:
        return Trajectory(np.array([t0]), X0[None, :].copy())
    sol = _solve(_stm_rhs(mu), _augmented(X0), t0, tf, tol, n_samples > 0, mu)
    epochs = np.linspace(t0, tf, n_samples + 2)
    states = np.empty((n_samples + 2, 6))
    states[0] = X0
    states[-1] = sol.y[:6, -1]
    if n_samples > 0:
        states[1:-1] = sol.sol(epochs[1:-1])[:6].T
    return Trajectory(epochs, states)


def propagate_with_stm(
    state,
    t0: float,
    tf: float,
    tol: Tolerances = DEFAULT_TOL,
    mu: float = MU,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the 42-equation state + variational system.

    Returns the final state and ``Phi(tf, t0)``.
    """
    X0 = as_state(state)
    _check_span(t0, tf)
    if tf == t0:
        return X0.copy(), np.eye(6)
    sol = _solve(_stm_rhs(mu), _augmented(X0), t0, tf, tol, False, mu)
    y = sol.y[:, -1]
    return y[:6].copy(), y[6:].reshape(6, 6).copy()


def stm_blocks(phi: np.ndarray):
    """Split a 6x6 STM into ``(Phi_rr, Phi_rv, Phi_vr, Phi_vv)``."""
    return phi[:3, :3], phi[:3, 3:], phi[3:, :3], phi[3:, 3:]


# Symplectic form of the CR3BP flow in (position, velocity) coordinates:
# canonical momenta are p = v + K r, so Omega = T^T J T with T = [[I, 0], [K, I]].
_K = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_T = np.block([[np.eye(3), np.zeros((3, 3))], [_K, np.eye(3)]])
_J = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])
OMEGA = _T.T @ _J @ _T
_OMEGA_INV = np.linalg.inv(OMEGA)


def symplectic_inverse(phi: np.ndarray) -> np.ndarray:
    """Inverse of an STM using ``Phi^T Omega Phi = Omega`` (no linear solve)."""
    return _OMEGA_INV @ phi.T @ OMEGA
