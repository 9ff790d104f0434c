"""
The 9:2 southern L2 NRHO: single-orbit refinement, monodromy and spectrum.

The orbit is symmetric about the x-z plane, so an initial state on that
plane with ``y = u = w = 0`` is periodic iff it crosses the plane
perpendicularly again at half period.  Refinement enforces exactly that with
the period held at ``4 pi / 9``.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import NRHO_PERIOD
from .dynamics import MIRROR_XZ, jacobi_constant
from .errors import ConvergenceError, SingularJacobianError, SpectrumError
from .propagation import (
    DEFAULT_TOL,
    Tolerances,
    propagate,
    propagate_with_stm,
    symplectic_inverse,
)

log = logging.getLogger(__name__)

# Initial state at perilune, LU and LU/TU.
NRHO_X0 = 0.987581435006489
NRHO_Z0 = 0.005276210630165
NRHO_V0 = 2.120240531159090

MAX_REFINE_ITER = 25
REFINE_FTOL = 1e-13
MAX_JACOBIAN_COND = 1e12
UNIT_PAIR_TOL = 1e-3


@dataclass
class PeriodicOrbit:
    initial_state: np.ndarray
    period: float = NRHO_PERIOD
    refined: bool = False
    iterations: int = 0
    closure_norm: float | None = None

    def __post_init__(self):
        X = np.asarray(self.initial_state, dtype=float).copy()
        if X.shape != (6,) or X[1] != 0.0 or X[3] != 0.0 or X[5] != 0.0:
            raise ValueError("initial state must be [x0, 0, z0, 0, v0, 0]")
        self.initial_state = X

    @classmethod
    def from_xzv(cls, x0, z0, v0, period=NRHO_PERIOD, **kw) -> "PeriodicOrbit":
        return cls(np.array([x0, 0.0, z0, 0.0, v0, 0.0]), period, **kw)

    @property
    def x0(self) -> float:
        return float(self.initial_state[0])

    @property
    def z0(self) -> float:
        return float(self.initial_state[2])

    @property
    def v0(self) -> float:
        return float(self.initial_state[4])

    @property
    def jacobi(self) -> float:
        return jacobi_constant(self.initial_state)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "z0": self.z0,
            "v0": self.v0,
            "period": self.period,
            "closure_norm": self.closure_norm,
            "jacobi": self.jacobi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicOrbit":
        closure = d.get("closure_norm")
        return cls.from_xzv(
            d["x0"],
            d["z0"],
            d["v0"],
            d.get("period", NRHO_PERIOD),
            refined=closure is not None,
            closure_norm=closure,
        )


def nominal_nrho() -> PeriodicOrbit:
    """Reference 9:2 NRHO initial state (x0, z0, vy0), before refinement."""
    return PeriodicOrbit.from_xzv(NRHO_X0, NRHO_Z0, NRHO_V0)


_FREE = [0, 2, 4]  # x0, z0, v0
_TARGET = [1, 3, 5]  # y, u, w at half period


def _half_period_residual(X0, period, tol):
    Xh, phi = propagate_with_stm(X0, 0.0, period / 2.0, tol)
    return Xh[_TARGET], phi[np.ix_(_TARGET, _FREE)]


def closure_norm(orbit: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL) -> float:
    """``||X(T) - X(0)||`` over one full period."""
    XT = propagate(orbit.initial_state, 0.0, orbit.period, tol).final
    return float(np.linalg.norm(XT - orbit.initial_state))


def refine_nrho(guess: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL) -> PeriodicOrbit:
    """Correct ``(x0, z0, v0)`` at fixed period until the half-period
    crossing is perpendicular to the x-z plane.

    Raises
    ------
    ConvergenceError
        No convergence within 25 Newton iterations.
    SingularJacobianError
        The 3x3 Jacobian has condition number above 1e12.
    """
    X = guess.initial_state.copy()
    for it in range(MAX_REFINE_ITER + 1):
        F, J = _half_period_residual(X, guess.period, tol)
        fnorm = float(np.linalg.norm(F))
        log.debug("refine iter %d: |F| = %.3e", it, fnorm)
        if fnorm <= REFINE_FTOL:
            break
        if it == MAX_REFINE_ITER:
            raise ConvergenceError(
                f"NRHO refinement did not converge in {MAX_REFINE_ITER} iterations "
                f"(|F| = {fnorm:.3e})"
            )
        cond = np.linalg.cond(J)
        if cond > MAX_JACOBIAN_COND:
            raise SingularJacobianError(f"refinement Jacobian condition {cond:.3e}")
        X[_FREE] -= np.linalg.solve(J, F)
    refined = replace(guess, initial_state=X, refined=True, iterations=it)
    refined.closure_norm = closure_norm(refined, tol)
    return refined


def monodromy(
    orbit: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL, method: str = "symmetric"
) -> np.ndarray:
    """Monodromy matrix ``Phi(t0 + T, t0)`` at the orbit's initial state.

    ``method="symmetric"`` integrates half a period and closes the loop with
    the mirror symmetry, ``Phi(T, 0) = G Phi(T/2, 0)^-1 G Phi(T/2, 0)``.  Only
    the half-period arc away from perilune is integrated, which keeps the
    round-off near the double unit eigenvalue small enough to resolve.
    ``method="direct"`` integrates the whole period.
    """
    if not orbit.refined:
        raise ValueError("monodromy requires a refined orbit")
    key = (tuple(orbit.initial_state), orbit.period, tol, method)
    return _monodromy_cached(key).copy()


@functools.lru_cache(maxsize=32)
def _monodromy_cached(key) -> np.ndarray:
    state, period, tol, method = key
    X0 = np.array(state)
    if method == "direct":
        return propagate_with_stm(X0, 0.0, period, tol)[1]
    if method != "symmetric":
        raise ValueError(f"unknown monodromy method {method!r}")
    _, half = propagate_with_stm(X0, 0.0, period / 2.0, tol)
    return MIRROR_XZ @ symplectic_inverse(half) @ MIRROR_XZ @ half


@dataclass
class MonodromySpectrum:
    """Eigenvalues (sorted) with unit-norm eigenvector columns and the pairing."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reciprocal_pair: tuple[int, int] = field(default=(0, 1))
    unit_pair: tuple[int, int] = field(default=(2, 3))
    conjugate_pair: tuple[int, int] = field(default=(4, 5))

    def pair_values(self, pair):
        return self.eigenvalues[pair[0]], self.eigenvalues[pair[1]]

    @property
    def reciprocal_defect(self) -> float:
        a, b = self.pair_values(self.reciprocal_pair)
        return float(abs(a * b - 1.0))

    @property
    def unit_distance(self) -> float:
        """Largest ``|lambda - 1|`` over the near-unit pair."""
        a, b = self.pair_values(self.unit_pair)
        return float(max(abs(a - 1.0), abs(b - 1.0)))

    @property
    def conjugate_defect(self) -> float:
        a, b = self.pair_values(self.conjugate_pair)
        return float(abs(a - np.conj(b)))

    def to_dict(self) -> dict:
        ev = self.eigenvalues
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in ev],
            "reciprocal_pair": list(self.reciprocal_pair),
            "unit_pair": list(self.unit_pair),
            "conjugate_pair": list(self.conjugate_pair),
            "reciprocal_defect": self.reciprocal_defect,
            "unit_distance": self.unit_distance,
            "conjugate_defect": self.conjugate_defect,
        }


def _sort_key(lam: complex):
    # Moduli equal to 1e-9 count as ties; ties are ordered by argument.
    return (-round(abs(lam), 9), float(np.angle(lam)))


def spectrum(m: np.ndarray) -> MonodromySpectrum:
    """Eigen-decomposition of a 6x6 monodromy matrix with pairing report.

    Eigenvalues are ordered by modulus descending, ties by argument.  The
    pairing picks the two eigenvalues closest to 1 as the unit pair, then the
    closest-to-conjugate pair among the rest; the remaining two form the
    reciprocal pair.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (6, 6) or not np.all(np.isfinite(m)):
        raise SpectrumError("monodromy must be a finite 6x6 matrix")
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigen-solver failed: {exc}") from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise SpectrumError("eigen-solver returned non-finite values")

    order = sorted(range(6), key=lambda i: _sort_key(vals[i]))
    vals = vals[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)

    unit = sorted(np.argsort(np.abs(vals - 1.0), kind="stable")[:2].tolist())
    rest = [i for i in range(6) if i not in unit]
    best = None
    for a in range(4):
        for b in range(a + 1, 4):
            i, j = rest[a], rest[b]
            d = abs(vals[i] - np.conj(vals[j]))
            if best is None or d < best[0]:
                best = (d, (i, j))
    conj = best[1]
    recip = tuple(i for i in rest if i not in conj)
    return MonodromySpectrum(vals, vecs, recip, tuple(unit), conj)


def unit_eigenvector(m: np.ndarray, tol: float = UNIT_PAIR_TOL) -> np.ndarray:
    """Real unit eigenvector for the eigenvalue closest to 1.

    Near 1 the eigenvalues come out as a slightly split (possibly complex)
    pair; the phase of the complex eigenvector is rotated so its largest
    component is real before the real part is taken.  Sign convention: the
    first nonzero component is positive.
    """
    vals, vecs = np.linalg.eig(np.asarray(m, dtype=float))
    i = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[i] - 1.0) > tol:
        raise SpectrumError(f"no eigenvalue within {tol} of 1 (closest {vals[i]:.6g})")
    v = vecs[:, i]
    k = int(np.argmax(np.abs(v)))
    e = (v * np.conj(v[k]) / abs(v[k])).real
    e /= np.linalg.norm(e)
    nz = np.flatnonzero(np.abs(e) > 1e-14)
    if e[nz[0]] < 0:
        e = -e
    return e
