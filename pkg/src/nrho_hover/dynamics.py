"""
Equations of motion of the Earth-Moon circular restricted three-body problem.

The rotating frame has its origin at the barycenter, the Earth at (-mu, 0, 0)
and the Moon at (1 - mu, 0, 0).  States are 6-vectors ``[x, y, z, u, v, w]``.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import EARTH_MOON
from .errors import SingularityError

MU = EARTH_MOON.mu

# Guard radius around each primary (LU).
SINGULARITY_RADIUS = 1e-12


def as_state(state) -> np.ndarray:
    """Validate and return a state as a float64 array of shape (6,)."""
    X = np.asarray(state, dtype=float)
    if X.shape != (6,):
        raise ValueError(f"state must have 6 components, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("state has non-finite components")
    return X


def _radii(x, y, z, mu):
    r1 = np.sqrt((x + mu) ** 2 + y * y + z * z)
    r2 = np.sqrt((x + mu - 1.0) ** 2 + y * y + z * z)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        raise SingularityError(
            f"state too close to a primary (r1={r1:.3e}, r2={r2:.3e} LU)"
        )
    return r1, r2


def eom_derivative(state, mu: float = MU) -> np.ndarray:
    """
    Time derivative of a rotating-frame state.

    Parameters
    ----------
    state : array_like, shape (6,)
        ``[x, y, z, u, v, w]`` in LU and LU/TU.
    mu : float, optional
        Mass parameter.

    Returns
    -------
    ndarray, shape (6,)
        ``[u, v, w, du, dv, dw]``.

    Raises
    ------
    SingularityError
        If the state lies within ``SINGULARITY_RADIUS`` of either primary.
    """
    x, y, z, u, v, w = state
    r1, r2 = _radii(x, y, z, mu)
    a1 = (1.0 - mu) / r1**3
    a2 = mu / r2**3
    return np.array(
        [
            u,
            v,
            w,
            x + 2.0 * v - a1 * (x + mu) - a2 * (x + mu - 1.0),
            y - 2.0 * u - (a1 + a2) * y,
            -(a1 + a2) * z,
        ]
    )


def jacobi_constant(state, mu: float = MU) -> float:
    """Jacobi constant, including the constant ``mu (1 - mu)`` term."""
    x, y, z, u, v, w = state
    r1, r2 = _radii(x, y, z, mu)
    return float(
        -(u * u + v * v + w * w)
        + (x * x + y * y)
        + 2.0 * (1.0 - mu) / r1
        + 2.0 * mu / r2
        + mu * (1.0 - mu)
    )


def gravity_gradient(x, y, z, mu: float = MU) -> np.ndarray:
    """3x3 Hessian of the effective potential (the lower-left Jacobian block)."""
    r1, r2 = _radii(x, y, z, mu)
    d1 = np.array([x + mu, y, z])
    d2 = np.array([x + mu - 1.0, y, z])
    a1 = (1.0 - mu) / r1**3
    a2 = mu / r2**3
    b1 = 3.0 * (1.0 - mu) / r1**5
    b2 = 3.0 * mu / r2**5
    U = b1 * np.outer(d1, d1) + b2 * np.outer(d2, d2)
    U[np.diag_indices(3)] -= a1 + a2
    U[0, 0] += 1.0
    U[1, 1] += 1.0
    return U


def eom_jacobian(state, mu: float = MU) -> np.ndarray:
    """Analytic 6x6 Jacobian of :func:`eom_derivative` with respect to the state."""
    x, y, z = state[0], state[1], state[2]
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 0:3] = gravity_gradient(x, y, z, mu)
    A[3, 4] = 2.0
    A[4, 3] = -2.0
    return A


def stm_derivative(state, phi, mu: float = MU):
    """Right-hand side of the coupled state + STM system.

    Returns ``(dX/dt, dPhi/dt)``.  Exploits the block structure of the
    Jacobian so the 6x6 product costs two 3x3 products.
    """
    dX = eom_derivative(state, mu)
    U = gravity_gradient(state[0], state[1], state[2], mu)
    top = phi[3:6, :]
    bottom = U @ phi[0:3, :]
    bottom[0] += 2.0 * phi[4]
    bottom[1] -= 2.0 * phi[3]
    return dX, np.vstack((top, bottom))


def augmented_derivative(y: np.ndarray, mu: float = MU) -> np.ndarray:
    """Flat right-hand side of the 42-component state + STM system.

    Same quantity as :func:`stm_derivative` with the STM stored row-major in
    ``y[6:]``, evaluated in one pass with scalar arithmetic.  This is the
    integrator's inner loop, so it avoids temporaries.
    """
    x, yy, z = y[0], y[1], y[2]
    dx1 = x + mu
    dx2 = dx1 - 1.0
    rho2 = yy * yy + z * z
    r1 = math.sqrt(dx1 * dx1 + rho2)
    r2 = math.sqrt(dx2 * dx2 + rho2)
    if r1 < SINGULARITY_RADIUS or r2 < SINGULARITY_RADIUS:
        raise SingularityError(
            f"state too close to a primary (r1={r1:.3e}, r2={r2:.3e} LU)"
        )
    a1 = (1.0 - mu) / r1**3
    a2 = mu / r2**3
    b1 = 3.0 * a1 / (r1 * r1)
    b2 = 3.0 * a2 / (r2 * r2)
    a = a1 + a2
    uxx = 1.0 - a + b1 * dx1 * dx1 + b2 * dx2 * dx2
    uyy = 1.0 - a + (b1 + b2) * yy * yy
    uzz = -a + (b1 + b2) * z * z
    uxy = (b1 * dx1 + b2 * dx2) * yy
    uxz = (b1 * dx1 + b2 * dx2) * z
    uyz = (b1 + b2) * yy * z

    out = np.empty(42)
    u, v = y[3], y[4]
    out[0:3] = y[3:6]
    out[3] = x + 2.0 * v - a1 * dx1 - a2 * dx2
    out[4] = yy - 2.0 * u - a * yy
    out[5] = -a * z
    # STM rows 0-2 (positions) and 3-5 (velocities), row-major
    p0, p1, p2 = y[6:12], y[12:18], y[18:24]
    out[6:24] = y[24:42]
    out[24:30] = uxx * p0 + uxy * p1 + uxz * p2 + 2.0 * y[30:36]
    out[30:36] = uxy * p0 + uyy * p1 + uyz * p2 - 2.0 * y[24:30]
    out[36:42] = uxz * p0 + uyz * p1 + uzz * p2
    return out


# Mirror about the x-z plane (y -> -y, u -> -u, w -> -w); with t -> -t this
# maps CR3BP solutions onto CR3BP solutions.
MIRROR_XZ = np.diag([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
