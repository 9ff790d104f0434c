"""Relative motion of a deputy about the NRHO chief, in the rotating frame.

Relative states are differences of absolute states, ``dX = X_d - X_chief``.
"""

from __future__ import annotations

import numpy as np

from .dynamics import as_state
from .propagation import DEFAULT_TOL, Tolerances, Trajectory, propagate


def linear_map(dX0, phi: np.ndarray) -> np.ndarray:
    """First-order relative state after the interval spanned by ``phi``."""
    return np.asarray(phi) @ np.asarray(dX0, dtype=float)


def nonlinear_relative(
    chief0,
    dX0,
    dt: float,
    tol: Tolerances = DEFAULT_TOL,
    n_samples: int = 0,
    chief_closure: bool = False,
) -> tuple[np.ndarray, Trajectory]:
    """Propagate chief and deputy independently and difference them.

    With ``chief_closure=True`` the chief's final state is taken to be its
    initial state (exact periodicity, valid when ``dt`` is the chief's
    period) instead of the propagated one, so chief-orbit integration error
    does not leak into the relative state.  The chief is then propagated only
    if samples are requested.

    Returns the final relative state and the sampled relative trajectory.
    """
    chief0 = as_state(chief0)
    dX0 = np.asarray(dX0, dtype=float)
    deputy = propagate(chief0 + dX0, 0.0, dt, tol, n_samples)
    if chief_closure and n_samples == 0:
        chief_states = np.vstack((chief0, chief0)) if len(deputy) == 2 else chief0[None, :]
    else:
        chief_states = propagate(chief0, 0.0, dt, tol, n_samples).states.copy()
        if chief_closure:
            chief_states[-1] = chief0
    rel = Trajectory(deputy.epochs, deputy.states - chief_states)
    return rel.final.copy(), rel
