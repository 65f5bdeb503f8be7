"""Double-well potential with quadratic tails, and its three-phase combination.

The well is W(u) = a (u^2 - u)^2 with wells at 0 and 1.  Outside a bracket
[lo, hi] the potential is replaced by the quadratic that matches value and
slope at the knot, so the extended function is C^1 everywhere and its second
derivative is globally bounded.  That bound feeds the stability constant of
the time steppers, which is why the bracket is part of the type rather than
a hidden constant.

The three-phase potential is built from the same well,

    W2(u1, u2) = (W(u1) + W(u2) + W(1 - u1 - u2)) / 2,

and only its partial derivatives are ever needed by the steppers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DoubleWell", "DEFAULT_WELL", "w2_value", "w2_partials"]


@dataclass(frozen=True)
class DoubleWell:
    """W(u) = amplitude * (u^2 - u)^2 on [lo, hi], quadratic tails outside."""

    amplitude: float = 18.0
    lo: float = -0.25
    hi: float = 1.25

    def __post_init__(self):
        if not self.lo < 0.0 < 1.0 < self.hi:
            raise ValueError("bracket [lo, hi] must contain both wells [0, 1]")

    def _core_w(self, u):
        q = u * u - u
        return self.amplitude * q * q

    def _core_dw(self, u):
        return 2.0 * self.amplitude * (u * u - u) * (2.0 * u - 1.0)

    def _core_d2w(self, u):
        return 2.0 * self.amplitude * (6.0 * u * u - 6.0 * u + 1.0)

    def w(self, u):
        """Extended potential value, elementwise."""
        u = np.asarray(u, dtype=float)
        lo, hi = self.lo, self.hi
        core = self._core_w(np.clip(u, lo, hi))
        below = np.minimum(u - lo, 0.0)
        above = np.maximum(u - hi, 0.0)
        tails = (
            self._core_dw(lo) * below
            + 0.5 * self._core_d2w(lo) * below**2
            + self._core_dw(hi) * above
            + 0.5 * self._core_d2w(hi) * above**2
        )
        return core + tails

    def dw(self, u):
        """Extended W', elementwise."""
        u = np.asarray(u, dtype=float)
        lo, hi = self.lo, self.hi
        core = self._core_dw(np.clip(u, lo, hi))
        below = np.minimum(u - lo, 0.0)
        above = np.maximum(u - hi, 0.0)
        return core + self._core_d2w(lo) * below + self._core_d2w(hi) * above

    def d2w(self, u):
        """Extended W'', elementwise; constant outside the bracket."""
        u = np.asarray(u, dtype=float)
        return self._core_d2w(np.clip(u, self.lo, self.hi))

    @property
    def curvature_bound(self) -> float:
        """max |W''| over the whole line (attained inside the bracket)."""
        # W'' is an upward parabola with vertex at u = 1/2
        candidates = [self.lo, self.hi, 0.5]
        return float(max(abs(self._core_d2w(u)) for u in candidates))


DEFAULT_WELL = DoubleWell()


def w2_value(u1, u2, well: DoubleWell = DEFAULT_WELL):
    """Three-phase potential W2(u1, u2), elementwise."""
    return 0.5 * (well.w(u1) + well.w(u2) + well.w(1.0 - u1 - u2))


def w2_partials(u1, u2, well: DoubleWell = DEFAULT_WELL):
    """(dW2/du1, dW2/du2), elementwise; both share the third-phase term."""
    third = well.dw(1.0 - np.asarray(u1) - np.asarray(u2))
    return 0.5 * (well.dw(u1) - third), 0.5 * (well.dw(u2) - third)
