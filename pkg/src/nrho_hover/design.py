"""
Design of 1:1 teardrop hovering formations along the NRHO.

A deputy starts at the revisit position ``rho`` relative to the chief and must
return to it after exactly one NRHO period.  The linear model (chief
monodromy) gives an initial velocity guess; a Newton corrector on the full
nonlinear dynamics then closes the revisit constraint

    psi(dv0) = dr(t0 + T) - dr(t0) = 0,

and the impulse needed at every revisit is ``dv(t0) - dv(t0 + T)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .constants import NRHO_PERIOD, km_to_lu, lu_to_km, vel_to_mps
from .errors import HoverError, SingularJacobianError
from .orbit import PeriodicOrbit, monodromy
from .propagation import DEFAULT_TOL, Tolerances, propagate_with_stm, stm_blocks
from .relative import nonlinear_relative

log = logging.getLogger(__name__)

PINV_RCOND = 1e-12
RESIDUAL_TOL = 1e-9  # revisit constraint satisfied
NEWTON_FTOL = 1e-11  # corrector keeps iterating down to this
MAX_NEWTON_ITER = 100
MAX_LINE_HALVINGS = 30
SINGLE_SHOT_BUDGET = 6  # single-shooting iterations before the two-arc fallback
SINGLE_SHOT_HALVINGS = 4
MAX_SEGMENT_ITER = 25
SEGMENT_HANDOFF = 1e-8  # two-arc residual at which single shooting takes over
MAX_JACOBIAN_COND = 1e14
VELOCITY_BOUND = 1.5  # LU/TU half-width of the box around the guess
MIN_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class RevisitSpec:
    """Revisit position on a sphere of radius ``rho_km`` at angles (alpha, beta)."""

    rho_km: float
    alpha: float
    beta: float
    revisit_period: float = NRHO_PERIOD

    def __post_init__(self):
        if not self.rho_km > 0:
            raise ValueError(f"rho must be positive, got {self.rho_km}")

    @property
    def rho(self) -> float:
        """Revisit distance in LU."""
        return km_to_lu(self.rho_km)

    @property
    def position(self) -> np.ndarray:
        return revisit_position(self.rho, self.alpha, self.beta)

    def to_dict(self) -> dict:
        return {
            "rho_km": self.rho_km,
            "alpha": self.alpha,
            "beta": self.beta,
            "revisit_period": self.revisit_period,
        }


@dataclass(frozen=True)
class ConstraintResidual:
    psi: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))


@dataclass
class TeardropSolution:
    spec: RevisitSpec
    dv0: np.ndarray
    residual: ConstraintResidual
    impulse_vec: np.ndarray
    converged: bool
    iterations: int
    dr0: np.ndarray = field(default=None)
    method: str = "single"  # corrector path: "single" or "two-segment"

    def __post_init__(self):
        if self.dr0 is None:
            self.dr0 = self.spec.position

    @property
    def impulse_mag(self) -> float:
        """Impulse magnitude in LU/TU."""
        return float(np.linalg.norm(self.impulse_vec))

    @property
    def dv_mps(self) -> float:
        return float(vel_to_mps(self.impulse_mag))

    @property
    def relative_state(self) -> np.ndarray:
        return np.concatenate((self.dr0, self.dv0))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "dr0": self.dr0.tolist(),
            "dv0": self.dv0.tolist(),
            "impulse_vec": self.impulse_vec.tolist(),
            "impulse_lu_tu": self.impulse_mag,
            "dv_mps": self.dv_mps,
            "residual": self.residual.psi.tolist(),
            "residual_norm": self.residual.norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TeardropSolution":
        spec = RevisitSpec(**d["spec"])
        return cls(
            spec=spec,
            dv0=np.array(d["dv0"], dtype=float),
            residual=ConstraintResidual(np.array(d["residual"], dtype=float)),
            impulse_vec=np.array(d["impulse_vec"], dtype=float),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            dr0=np.array(d["dr0"], dtype=float) if "dr0" in d else None,
            method=d.get("method", "single"),
        )


def revisit_position(rho: float, alpha: float, beta: float) -> np.ndarray:
    """Cartesian revisit position from spherical (rho, alpha, beta).

    ``alpha`` is measured from +z, ``beta`` from +x in the x-y plane.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    sa = math.sin(alpha)
    return np.array([rho * sa * math.cos(beta), rho * sa * math.sin(beta), rho * math.cos(alpha)])


def linear_velocity_guess(dr0, m: np.ndarray) -> np.ndarray:
    """Initial relative velocity that closes the revisit in the linear model.

    Solves ``Phi_rv dv0 = (I - Phi_rr) dr0`` with the SVD pseudoinverse;
    singular values below ``1e-12 * sigma_max`` are dropped.
    """
    rr, rv, _, _ = stm_blocks(np.asarray(m))
    b = (np.eye(3) - rr) @ np.asarray(dr0, dtype=float)
    return np.linalg.pinv(rv, rcond=PINV_RCOND) @ b


def linear_impulse(dr0, dv0, m: np.ndarray) -> np.ndarray:
    """Linear-model impulse vector ``dv(t0) - dv(t0 + T)``."""
    _, _, vr, vv = stm_blocks(np.asarray(m))
    return np.asarray(dv0) - (vr @ np.asarray(dr0) + vv @ np.asarray(dv0))


def impulse(dv0, dv_T) -> tuple[np.ndarray, float]:
    """Impulse applied at each revisit, as a vector and a magnitude (LU/TU)."""
    vec = np.asarray(dv0, dtype=float) - np.asarray(dv_T, dtype=float)
    return vec, float(np.linalg.norm(vec))


def revisit_residual(
    dr0, dv0, orbit: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL
) -> ConstraintResidual:
    """Position closure error of the deputy after one revisit period."""
    dX0 = np.concatenate((np.asarray(dr0, float), np.asarray(dv0, float)))
    dXT, _ = nonlinear_relative(
        orbit.initial_state, dX0, orbit.period, tol, chief_closure=True
    )
    return ConstraintResidual(dXT[:3] - dX0[:3])


def _shoot(chief0, dr0, dv0, period, tol):
    """Residual, deputy STM and final relative velocity for one trial."""
    Xd0 = chief0 + np.concatenate((dr0, dv0))
    XdT, phi = propagate_with_stm(Xd0, 0.0, period, tol)
    # Chief closes exactly after one period, so r_d(T) - r_d(0) = dr(T) - dr(0).
    return XdT[:3] - Xd0[:3], phi, XdT[3:] - chief0[3:]


def _newton(chief0, dr0, dv, period, tol, lo, hi, max_iter, max_halvings):
    """Single-shooting damped Newton on ``psi``; returns the best iterate."""
    psi, phi, dvT = _shoot(chief0, dr0, dv, period, tol)
    fnorm = np.linalg.norm(psi)
    it = 0
    while it < max_iter and fnorm > NEWTON_FTOL:
        J = phi[:3, 3:]
        cond = np.linalg.cond(J)
        if cond > MAX_JACOBIAN_COND:
            raise SingularJacobianError(f"corrector Jacobian condition {cond:.3e}")
        step = -np.linalg.solve(J, psi)
        lam = 1.0
        for _ in range(max_halvings):
            trial = np.clip(dv + lam * step, lo, hi)
            try:
                t_psi, t_phi, t_dvT = _shoot(chief0, dr0, trial, period, tol)
            except HoverError:
                t_norm = np.inf
            else:
                t_norm = np.linalg.norm(t_psi)
            if t_norm < fnorm:
                break
            lam *= 0.5
        else:
            log.debug("line search stalled at |psi| = %.3e", fnorm)
            break
        dv, psi, phi, dvT, fnorm = trial, t_psi, t_phi, t_dvT, t_norm
        it += 1
        log.debug("newton iter %d: |psi| = %.3e (lambda = %g)", it, fnorm, lam)
    return dv, psi, dvT, fnorm, it


@lru_cache(maxsize=8)
def _chief_half(chief0: tuple, period: float, tol: Tolerances):
    return propagate_with_stm(np.array(chief0), 0.0, 0.5 * period, tol)


def _two_segment(chief0, dr0, guess, period, tol, lo, hi, max_iter=MAX_SEGMENT_ITER):
    """Two-arc multiple shooting for ``dv0``.

    Unknowns are ``dv0`` and the deputy state at half period; the equations
    are continuity at the patch point and the revisit condition at the end.
    Splitting the arc keeps each leg's sensitivity moderate, which lets
    Newton converge from the linear guess where single shooting wanders.
    The patch point is seeded with the linear (STM) prediction.  Returns the
    ``(dv0, iterations)``; ``dv0`` is ``None`` if the iteration failed.
    """
    half = 0.5 * period
    cm, phi_half = _chief_half(tuple(chief0), period, tol)
    Xd0 = chief0 + np.concatenate((dr0, guess))
    z = np.concatenate((guess, cm + phi_half @ (Xd0 - chief0)))

    def system(z):
        X0 = chief0 + np.concatenate((dr0, z[:3]))
        X1, P1 = propagate_with_stm(X0, 0.0, half, tol)
        X2, P2 = propagate_with_stm(z[3:], half, period, tol)
        F = np.concatenate((X1 - z[3:], X2[:3] - X0[:3]))
        J = np.zeros((9, 9))
        J[:6, :3] = P1[:, 3:]
        J[:6, 3:] = -np.eye(6)
        J[6:, 3:] = P2[:3, :]
        return F, J

    try:
        F, J = system(z)
    except HoverError:
        return None, 0
    fnorm = np.linalg.norm(F)
    it = 0
    while it < max_iter:
        if fnorm <= NEWTON_FTOL:
            break
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None, it
        lam = 1.0
        for _ in range(MAX_LINE_HALVINGS):
            trial = z + lam * step
            trial[:3] = np.clip(trial[:3], lo, hi)
            try:
                t_F, t_J = system(trial)
            except HoverError:
                t_norm = np.inf
            else:
                t_norm = np.linalg.norm(t_F)
            if t_norm < fnorm:
                break
            lam *= 0.5
        else:
            break
        z, F, J, fnorm = trial, t_F, t_J, t_norm
        it += 1
        log.debug("two-segment iter %d: |F| = %.3e", it, fnorm)
    return (z[:3] if fnorm < SEGMENT_HANDOFF else None), it


def correct_teardrop(
    spec: RevisitSpec,
    guess,
    orbit: PeriodicOrbit,
    tol: Tolerances = DEFAULT_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> TeardropSolution:
    """Damped Newton correction of the initial relative velocity.

    The Jacobian of ``psi`` with respect to ``dv0`` is the position-velocity
    block of the STM along the deputy's absolute trajectory.  Each step is
    halved until the residual norm decreases, and iterates are clamped to
    ``guess +/- 1.5`` LU/TU per component.  Iteration continues to ``1e-11``
    (or until no further decrease is possible); the solution counts as
    converged when ``||psi|| < 1e-9``.

    Single shooting from ``guess`` is tried first with a short budget.  If it
    does not converge, a two-arc multiple-shooting Newton (split at half
    period) is started from the same guess and its result is polished by
    single shooting, so the reported residual always refers to one
    continuous arc.

    A solution that does not converge is still returned (best iterate) with
    ``converged=False``.
    """
    guess = np.asarray(guess, dtype=float)
    if not np.all(np.isfinite(guess)):
        raise ValueError("velocity guess must be finite")
    lo, hi = guess - VELOCITY_BOUND, guess + VELOCITY_BOUND
    chief0 = orbit.initial_state
    dr0 = spec.position
    period = spec.revisit_period

    dv, psi, dvT, fnorm, it = _newton(
        chief0, dr0, guess.copy(), period, tol, lo, hi,
        min(max_iter, SINGLE_SHOT_BUDGET), SINGLE_SHOT_HALVINGS,
    )
    method = "single"
    if fnorm < RESIDUAL_TOL and fnorm > NEWTON_FTOL and it < max_iter:
        dv, psi, dvT, fnorm, more = _newton(
            chief0, dr0, dv, period, tol, lo, hi, max_iter - it, MAX_LINE_HALVINGS
        )
        it += more
    elif fnorm >= RESIDUAL_TOL:
        seed, seg_it = _two_segment(chief0, dr0, guess, period, tol, lo, hi)
        it += seg_it
        if seed is not None:
            res = _newton(chief0, dr0, seed, period, tol, lo, hi, max_iter, MAX_LINE_HALVINGS)
            it += res[4]
            if res[3] < fnorm:
                dv, psi, dvT, fnorm, _ = res
                method = "two-segment"

    vec, _ = impulse(dv, dvT)
    return TeardropSolution(
        spec=spec,
        dv0=dv,
        residual=ConstraintResidual(psi),
        impulse_vec=vec,
        converged=bool(fnorm < RESIDUAL_TOL),
        iterations=it,
        dr0=dr0,
        method=method,
    )


def design_teardrop(
    spec: RevisitSpec, orbit: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL
) -> TeardropSolution:
    """Linear guess from the chief monodromy, then nonlinear correction."""
    guess = linear_velocity_guess(spec.position, monodromy(orbit, tol))
    return correct_teardrop(spec, guess, orbit, tol)


@dataclass
class SweepResult:
    rho_km: float
    alpha_grid: np.ndarray
    beta_grid: np.ndarray
    impulse_map: np.ndarray  # m/s, NaN where the cell failed
    solutions: dict = field(default_factory=dict)  # (i, j) -> TeardropSolution
    failures: dict = field(default_factory=dict)  # (i, j) -> reason

    @property
    def n_cells(self) -> int:
        return len(self.alpha_grid) * len(self.beta_grid)

    @property
    def converged_fraction(self) -> float:
        return len(self.solutions) / self.n_cells

    def rows(self):
        """CSV rows in grid order: alpha, beta, dv_mps, converged, iterations, residual_norm."""
        for i, a in enumerate(self.alpha_grid):
            for j, b in enumerate(self.beta_grid):
                sol = self.solutions.get((i, j))
                if sol is not None:
                    yield (a, b, sol.dv_mps, True, sol.iterations, sol.residual.norm)
                else:
                    reason = self.failures[(i, j)]
                    yield (a, b, float("nan"), False, reason.get("iterations", 0),
                           reason.get("residual_norm", float("nan")))


def angle_grid(step: float) -> np.ndarray:
    """Inclusive grid over [0, 2 pi]; ``step`` must divide 2 pi."""
    if not step > 0:
        raise ValueError("angle step must be positive")
    n = round(2.0 * math.pi / step)
    if n < 1 or abs(n * step - 2.0 * math.pi) > 1e-6:
        raise ValueError(f"step {step} does not divide 2 pi")
    return np.linspace(0.0, 2.0 * math.pi, n + 1)


def _sweep_cell(args):
    rho_km, alpha, beta, orbit, m, tol = args
    spec = RevisitSpec(rho_km, float(alpha), float(beta))
    try:
        guess = linear_velocity_guess(spec.position, m)
        return correct_teardrop(spec, guess, orbit, tol), None
    except (HoverError, ValueError, np.linalg.LinAlgError) as exc:  # recorded per cell
        return None, f"{type(exc).__name__}: {exc}"


def sweep_grid(
    rho_km: float,
    alpha_step: float,
    beta_step: float,
    orbit: PeriodicOrbit,
    tol: Tolerances = DEFAULT_TOL,
    workers: int = 1,
) -> SweepResult:
    """Design a teardrop at every (alpha, beta) node of an inclusive grid.

    Cells are processed row-major (alpha outer, beta inner).  With
    ``workers > 1`` cells run in a process pool; the result is identical to
    the serial run because every cell is an independent pure computation and
    results are collected in grid order.
    """
    alphas = angle_grid(alpha_step)
    betas = angle_grid(beta_step)
    m = monodromy(orbit, tol)
    tasks = [(rho_km, a, b, orbit, m, tol) for a in alphas for b in betas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, tasks, chunksize=4))
    else:
        results = [_sweep_cell(t) for t in tasks]

    nb = len(betas)
    imap = np.full((len(alphas), nb), np.nan)
    out = SweepResult(rho_km, alphas, betas, imap)
    for k, (sol, err) in enumerate(results):
        i, j = divmod(k, nb)
        if sol is not None and sol.converged:
            out.solutions[(i, j)] = sol
            imap[i, j] = sol.dv_mps
        elif sol is not None:
            out.failures[(i, j)] = {
                "reason": "not converged",
                "iterations": sol.iterations,
                "residual_norm": sol.residual.norm,
            }
        else:
            out.failures[(i, j)] = {"reason": err}
    return out


def min_impulse(sweep: SweepResult):
    """Converged cell with the smallest impulse: ``(alpha, beta, solution)``.

    Values within a relative ``1e-9`` of each other are ties (the grid covers
    some physical directions twice); ties go to the first cell in grid order.
    """
    best = None
    for key in sorted(sweep.solutions):
        sol = sweep.solutions[key]
        if best is None or sol.impulse_mag < best[1].impulse_mag * (1.0 - MIN_TIE_RTOL):
            best = (key, sol)
    if best is None:
        raise ValueError("sweep has no converged cells")
    (i, j), sol = best
    return float(sweep.alpha_grid[i]), float(sweep.beta_grid[j]), sol


def rho_to_km(rho_lu: float) -> float:
    return float(lu_to_km(rho_lu))
