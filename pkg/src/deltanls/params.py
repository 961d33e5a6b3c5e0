from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import SpecMismatch


@dataclass(frozen=True)
class Params:
    """Model parameters: nonlinearity power p, delta coupling gamma, frequency omega.

    gamma <= 0 is the repulsive case studied here (gamma = 0 is allowed as the
    free reference problem).  The dichotomy results need p > 5; functions that
    rely on that call :meth:`require_supercritical`.
    """

    p: float = 7.0
    gamma: float = -4.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise SpecMismatch(f"p must exceed 1, got {self.p}")
        if self.gamma > 0:
            raise SpecMismatch(f"only repulsive coupling gamma <= 0 is supported, got {self.gamma}")
        if not self.omega > 0:
            raise SpecMismatch(f"omega must be positive, got {self.omega}")

    @property
    def alpha(self) -> float:
        return (self.p - 1) / 2

    @property
    def c_p(self) -> float:
        return (2 * (self.p + 1)) ** (1 / (self.p - 1))

    @property
    def s_c(self) -> float:
        """Scaling-critical regularity 1/2 - 2/(p-1)."""
        return 0.5 - 2 / (self.p - 1)

    @property
    def low_frequency_cutoff(self) -> float:
        """gamma^2/4: even ground states exist only for omega above this."""
        return self.gamma**2 / 4

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)

    def require_supercritical(self):
        if not self.p > 5:
            raise SpecMismatch(f"this result needs p > 5, got p={self.p}")
        return self

    def to_dict(self) -> dict:
        return {"p": self.p, "gamma": self.gamma, "omega": self.omega}


def sign(value: float, scale: float = 1.0, band: float = 1e-8) -> int:
    """Tri-state sign with a zero band of width band*scale."""
    if abs(value) < band * abs(scale):
        return 0
    return 1 if value > 0 else -1


def isclose_rel(a: float, b: float, tol: float) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=0.0)
