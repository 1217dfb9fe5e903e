"""Smooth compactly supported cutoffs with closed-form derivatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


def smooth_step(t):
    """C-infinity step: 1 for ``t <= 0``, 0 for ``t >= 1``, with two derivatives.

    Built from the mollifier germ ``exp(-1/t)`` as
    ``g(1-t) / (g(1-t) + g(t))``, written as a logistic function of
    ``phi(t) = 1/(1-t) - 1/t`` to stay finite near both ends.
    """
    t = np.asarray(t, dtype=float)
    val = np.where(t <= 0.0, 1.0, 0.0)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    with np.errstate(over="ignore"):
        # subnormal t sends phi to -inf, which expit maps to the exact limit
        phi = 1.0 / (1.0 - tm) - 1.0 / tm
    # within 1e-3 of either end L (1 - L) underflows to 0; clipping keeps the
    # chain-rule factors finite there without changing any result
    tc = np.clip(tm, 1e-3, 1.0 - 1e-3)
    dphi = 1.0 / tc**2 + 1.0 / (1.0 - tc) ** 2
    ddphi = 2.0 / (1.0 - tc) ** 3 - 2.0 / tc**3
    L = expit(-phi)
    one_minus_L = expit(phi)
    dL = -L * one_minus_L
    ddL = L * one_minus_L * (one_minus_L - L)
    val[mid] = L
    d1[mid] = dL * dphi
    d2[mid] = ddL * dphi**2 + dL * ddphi
    return val, d1, d2


@dataclass(frozen=True)
class SpatialCutoff:
    """Radial plateau bump: 1 within ``inner_radius`` of ``center``, 0 beyond ``outer_radius``."""

    center: float
    inner_radius: float = 0.25
    outer_radius: float = 0.5

    def __post_init__(self):
        if self.inner_radius < 0 or not self.outer_radius > self.inner_radius:
            raise ValueError("need 0 <= inner_radius < outer_radius")

    def _t(self, x):
        r = np.abs(np.asarray(x, dtype=float) - self.center)
        return (r - self.inner_radius) / (self.outer_radius - self.inner_radius)

    def __call__(self, x) -> np.ndarray:
        return smooth_step(self._t(x))[0]

    def derivatives(self, x):
        """``(chi, chi', chi'')`` in ``x``."""
        x = np.asarray(x, dtype=float)
        val, d1, d2 = smooth_step(self._t(x))
        width = self.outer_radius - self.inner_radius
        sgn = np.sign(x - self.center)
        return val, d1 * sgn / width, d2 / width**2

