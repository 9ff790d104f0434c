"""Earth-Moon system constants and unit conversions.

Everything internal is nondimensional: lengths in LU (Earth-Moon distance),
times in TU (synodic period / 2 pi), velocities in LU/TU.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Constants:
    mu: float = 1.21506683e-2
    LU: float = 3.84405000e5  # km
    TU: float = 3.75676968e5  # s
    R_E: float = 6378.145  # km
    R_M: float = 1737.100  # km

    @property
    def T_EM(self) -> float:
        """Earth-Moon period in seconds, ``2 pi TU``.

        Derived rather than stored: the often-quoted 2.24735067e6 s has two
        digits transposed (it equals 2 pi * 357676.968).
        """
        return 2.0 * math.pi * self.TU

    @property
    def VU(self) -> float:
        """Velocity unit in km/s."""
        return self.LU / self.TU

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["T_EM"] = self.T_EM
        return d


EARTH_MOON = Constants()

# 9:2 synodic resonance: nine revolutions per two lunar synodic months.
NRHO_PERIOD = 4.0 * math.pi / 9.0

_KINDS = {"length", "velocity", "time"}


def _scale(kind: str, const: Constants) -> float:
    if kind == "length":
        return const.LU
    if kind == "time":
        return const.TU
    if kind == "velocity":
        return const.VU
    raise ValueError(f"unknown unit kind {kind!r}; expected one of {sorted(_KINDS)}")


def convert_units(value, kind: str, direction: str, const: Constants = EARTH_MOON):
    """Convert between nondimensional and dimensional units.

    Dimensional units are km, s and km/s.  ``direction`` is
    ``"to-nondimensional"`` or ``"to-dimensional"``.  Works on scalars and
    numpy arrays alike.
    """
    scale = _scale(kind, const)
    if direction == "to-nondimensional":
        return value / scale
    if direction == "to-dimensional":
        return value * scale
    raise ValueError(f"unknown direction {direction!r}")


def km_to_lu(km, const: Constants = EARTH_MOON):
    return km / const.LU


def lu_to_km(lu, const: Constants = EARTH_MOON):
    return lu * const.LU


def vel_to_mps(v, const: Constants = EARTH_MOON):
    """LU/TU to m/s."""
    return v * const.VU * 1000.0
