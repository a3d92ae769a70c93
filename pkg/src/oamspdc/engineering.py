"""Pump design for a target entangled state in an OAM subspace.

OAM conservation means each target pair (l_s, l_i) is fed by exactly one
pump charge L = l_s + l_i, so the inverse problem decouples into one complex
division per pair followed by a global normalization.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateCoupling, MissingTerm, UnreachableTarget, ZeroSubspaceWeight
from .spectrum import (
    BiphotonAmplitudes,
    CrystalConfig,
    ModeWindow,
    PumpSpec,
    QuadratureSettings,
    azimuthal_marginal,
    overlap_amplitudes,
    spectrum_for_pump,
)

__all__ = [
    "TargetState",
    "EngineeringResult",
    "solve_pump_for_target",
    "apply_pump_phases",
    "subspace_state",
    "fix_global_phase",
    "COUPLING_FLOOR",
]

COUPLING_FLOOR = 1e-14
DEFAULT_SUBSPACE = ((-1, -1), (0, 0), (1, 1))


@dataclass(frozen=True)
class TargetState:
    subspace: tuple
    coefficients: tuple

    def __init__(self, subspace: Sequence = DEFAULT_SUBSPACE, coefficients: Sequence | None = None):
        pairs = tuple((int(a), int(b)) for a, b in subspace)
        if len(set(pairs)) != len(pairs):
            raise ValueError(f"subspace pairs must be distinct: {pairs}")
        if coefficients is None:
            coefficients = [1.0] * len(pairs)
        coefs = np.asarray(coefficients, dtype=complex)
        if coefs.shape != (len(pairs),):
            raise ValueError("one coefficient per subspace pair required")
        norm = np.linalg.norm(coefs)
        if norm == 0:
            raise ValueError("target state has zero norm")
        object.__setattr__(self, "subspace", pairs)
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in coefs / norm))

    @classmethod
    def mes(cls, d: int = 3) -> "TargetState":
        half = d // 2
        return cls(tuple((l, l) for l in range(-half, half + 1)))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coefficients)

    @property
    def charges(self) -> tuple:
        return tuple(a + b for a, b in self.subspace)

    def to_dict(self) -> dict:
        return {
            "subspace": [list(p) for p in self.subspace],
            "coefficients": [{"re": c.real, "im": c.imag} for c in self.coefficients],
        }


@dataclass
class EngineeringResult:
    pump: PumpSpec
    achieved: np.ndarray
    leakage: float
    leakage_all_p: float
    target: TargetState
    collection: str
    couplings: dict = field(default_factory=dict)
    spectrum: BiphotonAmplitudes | None = None

    def to_dict(self) -> dict:
        return {
            "pump": self.pump.to_dict(),
            "target": self.target.to_dict(),
            "collection": self.collection,
            "achieved": [{"re": c.real, "im": c.imag, "abs": abs(c), "arg": cmath.phase(c)} for c in self.achieved],
            "leakage_p0": self.leakage,
            "leakage_all_p": self.leakage_all_p,
            "couplings": {
                str(L): {"re": c.real, "im": c.imag} for L, c in sorted(self.couplings.items())
            },
        }


def fix_global_phase(vec) -> np.ndarray:
    """Rotate so the first component with non-negligible magnitude is real positive."""
    vec = np.asarray(vec, dtype=complex)
    mags = np.abs(vec)
    if not mags.any():
        return vec.copy()
    first = int(np.argmax(mags > 1e-12 * mags.max()))
    return vec * np.exp(-1j * np.angle(vec[first]))


def subspace_state(amps: BiphotonAmplitudes, target: TargetState | Sequence = DEFAULT_SUBSPACE):
    """Fundamental-radial-mode state on the subspace and the weight outside it.

    Returns ``(vector, leakage)``; the vector is unit norm with the global
    phase fixed by :func:`fix_global_phase`.
    """
    pairs = target.subspace if isinstance(target, TargetState) else tuple(target)
    c = np.array([amps.amplitude(ls, li, 0, 0) for ls, li in pairs])
    total = amps.total_probability()
    weight = float(np.sum(np.abs(c) ** 2))
    if weight < COUPLING_FLOOR:
        raise ZeroSubspaceWeight(f"in-subspace probability {weight:.3e} is below {COUPLING_FLOOR}")
    vec = fix_global_phase(c / math.sqrt(weight))
    leakage = max(0.0, 1.0 - weight / total)
    return vec, leakage


def leakage_all_p(amps: BiphotonAmplitudes, pairs) -> float:
    marg = azimuthal_marginal(amps)
    return max(0.0, 1.0 - sum(marg.get(tuple(p), 0.0) for p in pairs))


def apply_pump_phases(pump: PumpSpec, theta0: float, theta2: float) -> PumpSpec:
    """Multiply C_0 by exp(i theta0) and C_2 by exp(i theta2); C_-2 stays the reference."""
    have = set(pump.charges)
    missing = {-2, 0, 2} - have
    if missing:
        raise MissingTerm(f"pump lacks charges {sorted(missing)}")
    factors = {0: cmath.exp(1j * theta0), 2: cmath.exp(1j * theta2)}
    return PumpSpec((L, C * factors.get(L, 1.0)) for L, C in pump.terms)


def solve_pump_for_target(
    target: TargetState,
    crystal: CrystalConfig,
    window: ModeWindow | None = None,
    quad: QuadratureSettings | None = None,
    ansatz: Sequence[int] | None = None,
    collection: str = "azimuthal",
) -> EngineeringResult:
    """Pump coefficients that put ``target`` on the subspace.

    ``collection="fiber"`` matches the p_s = p_i = 0 amplitudes (single-mode
    fibre detection), so the extracted subspace state equals the target.
    ``collection="azimuthal"`` matches the radially summed marginals
    ``P(l_s, l_i)`` in magnitude and the p = 0 amplitudes in phase.
    """
    if collection not in ("azimuthal", "fiber"):
        raise ValueError(f"unknown collection mode {collection!r}")
    window = window or ModeWindow()
    quad = quad or QuadratureSettings()
    allowed = set(target.charges if ansatz is None else ansatz)

    seen: dict = {}
    for pair, L in zip(target.subspace, target.charges):
        if L not in allowed:
            raise UnreachableTarget(f"pair {pair} needs pump charge {L}, absent from ansatz {sorted(allowed)}")
        if L in seen:
            raise UnreachableTarget(f"pairs {seen[L]} and {pair} both need pump charge {L}")
        seen[L] = pair
        ls, li = pair
        if abs(ls) > window.l_max or abs(li) > window.l_max:
            raise UnreachableTarget(f"pair {pair} lies outside the window")

    terms = []
    couplings = {}
    for pair, L, t in zip(target.subspace, target.charges, target.coefficients):
        ls, li = pair
        rows = [(L, 0, ls, ps, li, pi) for ps in range(window.p_max + 1) for pi in range(window.p_max + 1)]
        amps = overlap_amplitudes(rows, crystal, quad)
        a0 = complex(amps[0])
        couplings[L] = a0
        if abs(a0) < COUPLING_FLOOR:
            raise DegenerateCoupling(f"pair {pair} couples to charge {L} with |a|={abs(a0):.3e}")
        if t == 0:
            continue
        if collection == "fiber":
            C = t / a0
        else:
            m = math.sqrt(float(np.sum(np.abs(amps) ** 2)))
            C = abs(t) / m * cmath.exp(1j * (cmath.phase(t) - cmath.phase(a0)))
        terms.append((L, C))

    pump = PumpSpec(terms).normalized()
    amps = spectrum_for_pump(pump, crystal, window, quad)
    achieved, leak = subspace_state(amps, target)
    return EngineeringResult(
        pump=pump,
        achieved=achieved,
        leakage=leak,
        leakage_all_p=leakage_all_p(amps, target.subspace),
        target=target,
        collection=collection,
        couplings=couplings,
        spectrum=amps,
    )
