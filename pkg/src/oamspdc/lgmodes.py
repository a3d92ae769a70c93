"""Laguerre-Gauss modes: field evaluation, normalization and waist scaling.

All lengths are in metres unless a caller chooses consistent other units;
nothing here depends on the unit system beyond ``z_r = pi w0**2 / wavelength``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LGIndex",
    "BeamGeometry",
    "factorial_f",
    "double_factorial",
    "associated_laguerre",
    "lg_norm",
    "lg_field",
    "adjusted_waist",
]

_EXACT_FACTORIAL_MAX = 20


@dataclass(frozen=True, order=True)
class LGIndex:
    """Azimuthal charge ``l`` and radial order ``p`` of a Laguerre-Gauss mode."""

    l: int
    p: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"radial index must be non-negative, got p={self.p}")


@dataclass(frozen=True)
class BeamGeometry:
    w0: float
    wavelength: float

    def __post_init__(self):
        if not self.w0 > 0:
            raise ValueError(f"waist must be positive, got {self.w0}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def z_r(self) -> float:
        return math.pi * self.w0**2 / self.wavelength

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def width(self, z):
        """Beam radius ``w(z)``."""
        return self.w0 * np.sqrt(1.0 + (np.asarray(z, dtype=float) / self.z_r) ** 2)


def factorial_f(n: int) -> float:
    """n! as a float; log-domain above 20 so large n do not overflow early."""
    if n < 0:
        raise ValueError("factorial of negative number")
    if n <= _EXACT_FACTORIAL_MAX:
        return float(math.factorial(n))
    return math.exp(math.lgamma(n + 1.0))


def double_factorial(n: int) -> int:
    """Product of the integers ``n, n-2, ...`` down to 1 or 2; 1 for n in {0, 1}.

    Returns an exact Python integer, which cannot overflow. Converting a
    huge result to float raises ``OverflowError``.
    """
    if n < 0:
        raise ValueError(f"double factorial needs n >= 0, got {n}")
    out = 1
    for k in range(n, 1, -2):
        out *= k
    return out


def associated_laguerre(p: int, alpha: int, x):
    """Generalized Laguerre polynomial ``L_p^alpha(x)`` by upward recurrence."""
    if p < 0 or alpha < 0:
        raise ValueError("p and alpha must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def lg_norm(l: int, p: int) -> float:
    """Prefactor sqrt(2 p! / (pi (p+|l|)!)) giving unit power in the transverse plane."""
    al = abs(l)
    return math.sqrt(2.0 * math.exp(math.lgamma(p + 1.0) - math.lgamma(p + al + 1.0)) / math.pi)


def lg_field(index: LGIndex, geom: BeamGeometry, r, phi, z=0.0):
    """Complex LG field at cylindrical coordinates ``(r, phi, z)``.

    Includes the azimuthal phase ``exp(i l phi)``, the radial envelope with its
    Laguerre factor, the wavefront curvature term and the Gouy phase
    ``(|l| + 2p + 1) atan(z / z_r)``. Broadcasts over array arguments.
    """
    l, p = index.l, index.p
    al = abs(l)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    zr = geom.z_r
    w = geom.w0 * np.sqrt(1.0 + (z / zr) ** 2)
    rho2 = 2.0 * r**2 / w**2
    radial = (lg_norm(l, p) / w) * np.sqrt(rho2) ** al * associated_laguerre(p, al, rho2) * np.exp(-(r**2) / w**2)
    phase = l * phi - geom.k * r**2 * z / (2.0 * (z**2 + zr**2)) + (al + 2 * p + 1) * np.arctan(z / zr)
    return radial * np.exp(1j * phase)


def adjusted_waist(L: int, w0: float) -> float:
    """Per-charge hologram waist ``w0 2^-|L| (2|L|+1)!! / |L|!``."""
    if not w0 > 0:
        raise ValueError("w0 must be positive")
    aL = abs(L)
    return w0 * (double_factorial(2 * aL + 1) / (2**aL * math.factorial(aL)))
