"""Time profiles with prescribed asymptotics and power-law decay rates.

Profiles are plain callables t -> float that must also accept +-inf and
return the exact endpoint value there.  They are small frozen dataclasses
so that families built from them can be pickled into worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ConstantProfile:
    value: float = 1.0

    def __call__(self, t: float) -> float:
        return self.value

    def derivative(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class SmoothStepProfile:
    """Monotone step f(t) = mid + half * t/(1+|t|^p)^(1/p) with p = decay.

    Satisfies |f(t) - f(+-inf)| <= C <t>^{-decay}, so a family built from it
    has short-range rate delta = decay.  The default decay 2 gives the
    classic t/sqrt(1+t^2) shape.
    """

    left: float
    right: float
    decay: float = 2.0
    time_scale: float = 1.0

    def __call__(self, t: float) -> float:
        mid = 0.5 * (self.left + self.right)
        half = 0.5 * (self.right - self.left)
        if math.isinf(t):
            return self.right if t > 0 else self.left
        u = t / self.time_scale
        s = u / (1.0 + abs(u) ** self.decay) ** (1.0 / self.decay)
        return mid + half * s

    def derivative(self, t: float) -> float:
        # d/du [u (1+|u|^p)^{-1/p}] collapses to (1+|u|^p)^{-1/p-1}
        if math.isinf(t):
            return 0.0
        u = t / self.time_scale
        p = self.decay
        half = 0.5 * (self.right - self.left)
        return half * (1.0 + abs(u) ** p) ** (-1.0 / p - 1.0) / self.time_scale

    @property
    def endpoints(self):
        return self.left, self.right


def profile_endpoints(profile) -> tuple[float, float]:
    """(f(-inf), f(+inf)) for any profile callable."""
    return profile(float("-inf")), profile(float("inf"))


def profile_derivative(profile, t: float) -> float:
    """Analytic derivative when the profile provides one, else a centered
    difference; profile-built families should never hit the fallback."""
    if hasattr(profile, "derivative"):
        return float(profile.derivative(t))
    if math.isinf(t):
        return 0.0
    h = 1e-6 * math.hypot(1.0, t)
    return (float(profile(t + h)) - float(profile(t - h))) / (2.0 * h)
