"""
Continuation of teardrop formations in revisit distance.

Starting from a converged solution, each step moves the revisit position
outward by ``delta_rho`` along the same (alpha, beta) direction.  A linear
predictor built from the deputy's own one-period STM estimates the change in
initial relative velocity; the Newton corrector then closes the revisit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .constants import km_to_lu
from .design import (
    RESIDUAL_TOL,
    RevisitSpec,
    TeardropSolution,
    correct_teardrop,
    revisit_position,
)
from .errors import HoverError
from .orbit import PeriodicOrbit
from .propagation import DEFAULT_TOL, Tolerances, propagate_with_stm, stm_blocks

log = logging.getLogger(__name__)

RESIDUAL_EXCEEDED = "residual-exceeded"
MAX_STEPS = "max-steps"
TARGET_REACHED = "target-reached"

RANK_RTOL = 1e-12


@dataclass(frozen=True)
class ContinuationConfig:
    delta_rho_km: float = 0.1
    max_steps: int = 499
    eps_tol: float = RESIDUAL_TOL
    retry_halving: bool = False
    max_halvings: int = 4

    def __post_init__(self):
        if not self.delta_rho_km > 0:
            raise ValueError("delta_rho must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")

    def to_dict(self) -> dict:
        return {
            "delta_rho_km": self.delta_rho_km,
            "max_steps": self.max_steps,
            "eps_tol": self.eps_tol,
            "retry_halving": self.retry_halving,
        }


@dataclass
class PredictorSystem:
    """``A x = b`` for the velocity update; ``phi`` is the deputy STM used."""

    A: np.ndarray
    b: np.ndarray
    phi: np.ndarray


@dataclass
class Family:
    members: list[TeardropSolution]
    config: ContinuationConfig
    termination_reason: str
    rho_labels: list[Decimal] = field(default_factory=list)
    rank_deficient_steps: list[int] = field(default_factory=list)

    @property
    def rho_km(self) -> list[float]:
        return [float(r) for r in self.rho_labels]

    def member_at(self, rho_km) -> TeardropSolution | None:
        key = Decimal(str(rho_km))
        for label, m in zip(self.rho_labels, self.members):
            if label == key:
                return m
        return None


def deputy_stm(member: TeardropSolution, orbit: PeriodicOrbit, tol: Tolerances = DEFAULT_TOL):
    """One-period STM along the member's absolute deputy trajectory."""
    Xd0 = orbit.initial_state + member.relative_state
    return propagate_with_stm(Xd0, 0.0, member.spec.revisit_period, tol)[1]


def predictor_system(
    member: TeardropSolution,
    delta_rho_km: float,
    orbit: PeriodicOrbit,
    tol: Tolerances = DEFAULT_TOL,
) -> PredictorSystem:
    """Linearized revisit constraint for a step ``delta_rho`` in distance.

    ``A`` is the position-velocity block of the deputy STM and
    ``b = (I - Phi_rr) d_rho`` with ``d_rho`` the change in revisit position
    along the member's (alpha, beta).  Not the chief monodromy.
    """
    phi = deputy_stm(member, orbit, tol)
    rr, rv, _, _ = stm_blocks(phi)
    spec = member.spec
    if delta_rho_km == 0:
        d_rho = np.zeros(3)
    else:
        d_rho = revisit_position(km_to_lu(delta_rho_km), spec.alpha, spec.beta)
    b = d_rho - rr @ d_rho
    return PredictorSystem(rv.copy(), b, phi)


def solve_predictor(sys: PredictorSystem) -> tuple[np.ndarray, bool]:
    """Least-squares velocity update ``(A^T A)^-1 A^T b`` via SVD.

    Returns ``(dv_update, rank_deficient)``.  If the smallest singular value
    falls below ``1e-12 sigma_max`` the minimum-norm solution is returned and
    the flag is set.
    """
    A = np.asarray(sys.A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("predictor matrix is not finite")
    x, _, rank, s = np.linalg.lstsq(A, sys.b, rcond=RANK_RTOL)
    deficient = bool(s[-1] < RANK_RTOL * s[0]) if s[0] > 0 else True
    if deficient:
        log.warning("rank-deficient predictor (sigma_min/sigma_max = %.3e)", s[-1] / max(s[0], 1e-300))
    return x, deficient


def _step(member, rho_next_km, delta_km, orbit, tol):
    sys = predictor_system(member, delta_km, orbit, tol)
    dv_update, deficient = solve_predictor(sys)
    spec = RevisitSpec(rho_next_km, member.spec.alpha, member.spec.beta, member.spec.revisit_period)
    guess = member.dv0 + dv_update
    return correct_teardrop(spec, guess, orbit, tol), deficient


def continue_family(
    seed: TeardropSolution,
    target_rho_km: float,
    config: ContinuationConfig = ContinuationConfig(),
    orbit: PeriodicOrbit | None = None,
    tol: Tolerances = DEFAULT_TOL,
    progress=None,
) -> Family:
    """Predictor-corrector continuation from ``seed`` out to ``target_rho_km``.

    Stops when a corrected member has ``||psi|| > eps_tol``, when the step
    count exceeds ``max_steps``, or when the target distance is reached.
    Distances are tracked as decimals in km so labels such as 50.0 km are
    exact after hundreds of 0.1 km steps.
    """
    if orbit is None:
        raise ValueError("continue_family needs the chief orbit")
    if not seed.converged or seed.residual.norm >= config.eps_tol:
        raise ValueError("seed solution is not converged")
    rho = Decimal(str(seed.spec.rho_km))
    target = Decimal(str(target_rho_km))
    step = Decimal(str(config.delta_rho_km))
    if target < rho:
        raise ValueError("target distance is below the seed distance")

    members = [seed]
    labels = [rho]
    deficient_steps: list[int] = []
    reason = TARGET_REACHED
    j = 0
    while rho < target:
        if j >= config.max_steps:
            reason = MAX_STEPS
            break
        j += 1
        delta = min(step, target - rho)
        try:
            sol, deficient = _step(members[-1], float(rho + delta), float(delta), orbit, tol)
        except HoverError as exc:
            log.warning("step %d failed: %s", j, exc)
            sol, deficient = None, False
        accepted = sol is not None and sol.converged and sol.residual.norm <= config.eps_tol
        halvings = 0
        while not accepted and config.retry_halving and halvings < config.max_halvings:
            halvings += 1
            delta = delta / 2
            try:
                sol, deficient = _step(members[-1], float(rho + delta), float(delta), orbit, tol)
            except HoverError:
                sol = None
            accepted = sol is not None and sol.converged and sol.residual.norm <= config.eps_tol
        if not accepted:
            reason = RESIDUAL_EXCEEDED
            break
        rho = rho + delta
        if deficient:
            deficient_steps.append(j)
        members.append(sol)
        labels.append(rho)
        if progress is not None:
            progress(j, float(rho), sol)
    return Family(members, config, reason, labels, deficient_steps)
