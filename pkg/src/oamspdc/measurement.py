"""Projective coincidence measurements on the two-qutrit OAM state.

Arm bases are ordered ``l = -1, 0, 1`` and joint states use index
``3 * a + b``. States are labeled in the correlated convention, where the
MES is ``(|-1,-1> + |0,0> + |1,1>) / sqrt(3)``. The anti-correlated
convention (``|l>|-l>``) is reached with :func:`relabel_idler`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import DimensionMismatch, FitDiverged

__all__ = [
    "D",
    "ProjectorSpec",
    "CountRecord",
    "FitResult",
    "mes_state",
    "relabel_idler",
    "phase_unitary",
    "with_pump_phases",
    "coincidence_probability",
    "interference_projectors",
    "interference_closed_form",
    "interference_curve",
    "visibility",
    "simulate_counts",
    "calibrate_rate",
    "fit_offset_phases",
    "white_noise",
]

D = 3
# joint index of |0,0> and |1,1> in the correlated labeling
IDX_00 = 4
IDX_11 = 8


@dataclass(frozen=True)
class ProjectorSpec:
    """Single-arm projector onto a (normalized) superposition of ``|-1>, |0>, |1>``."""

    coefficients: tuple

    def __init__(self, coefficients: Sequence[complex]):
        v = np.asarray(coefficients, dtype=complex)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("projector needs at least one nonzero coefficient")
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in v / n))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coefficients)

    @classmethod
    def basis(cls, l: int, d: int = D) -> "ProjectorSpec":
        v = np.zeros(d, dtype=complex)
        v[l + d // 2] = 1.0
        return cls(v)


@dataclass(frozen=True)
class CountRecord:
    projectors: object
    probability: float
    counts: int
    integration_time: float
    rate_scale: float


def mes_state(theta0: float = 0.0, theta2: float = 0.0) -> np.ndarray:
    psi = np.zeros(D * D, dtype=complex)
    psi[0] = 1.0
    psi[IDX_00] = np.exp(1j * theta0)
    psi[IDX_11] = np.exp(1j * theta2)
    return psi / math.sqrt(3.0)


def white_noise(state, v: float) -> np.ndarray:
    """``v |psi><psi| + (1 - v) I / d^2`` (or the same mixture with a density matrix)."""
    rho = _as_density(state)
    n = rho.shape[0]
    return v * rho + (1.0 - v) * np.eye(n) / n


def relabel_idler(state, d: int = D) -> np.ndarray:
    """Flip the idler label ``l -> -l`` (mirror-count change in the idler arm)."""
    arr = np.asarray(state, dtype=complex)
    perm = np.array([a * d + (d - 1 - b) for a in range(d) for b in range(d)])
    if arr.ndim == 1:
        return arr[perm]
    return arr[np.ix_(perm, perm)]


def phase_unitary(theta0: float, theta2: float) -> np.ndarray:
    """Diagonal unitary imprinting the pump phases on ``|0,0>`` and ``|1,1>``."""
    diag = np.ones(D * D, dtype=complex)
    diag[IDX_00] = np.exp(1j * theta0)
    diag[IDX_11] = np.exp(1j * theta2)
    return np.diag(diag)


def with_pump_phases(state, theta0: float, theta2: float):
    U = phase_unitary(theta0, theta2)
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return U @ arr
    return U @ arr @ U.conj().T


def _as_density(state) -> np.ndarray:
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def _vec(p) -> np.ndarray:
    return p.vector if isinstance(p, ProjectorSpec) else np.asarray(p, dtype=complex)


def coincidence_probability(state, projA, projB) -> float:
    """``|<a|<b|psi>|^2`` for a state vector, ``Tr[(P_a x P_b) rho]`` for a matrix."""
    a, b = _vec(projA), _vec(projB)
    phi = np.kron(a, b)
    arr = np.asarray(state, dtype=complex)
    if arr.shape[0] != phi.shape[0] or (arr.ndim == 2 and arr.shape[1] != phi.shape[0]):
        raise DimensionMismatch(f"state of shape {arr.shape} vs projector dimension {phi.shape[0]}")
    if arr.ndim == 1:
        val = abs(np.vdot(phi, arr)) ** 2
    else:
        val = float(np.real(np.vdot(phi, arr @ phi)))
    return float(min(1.0, max(0.0, val)))


def b4_vector(alpha: float) -> np.ndarray:
    """Measurement superposition ``(|-1> + e^{i alpha}|0> + e^{i alpha}|1>) / sqrt(3)``."""
    return np.array([1.0, np.exp(1j * alpha), np.exp(1j * alpha)]) / math.sqrt(3.0)


def interference_projectors(alpha: float, correlated: bool = True):
    """Projectors for the phase-transfer scan: ``alpha`` on arm A, ``-alpha`` on arm B.

    Arm B's superposition is written in its own (anti-correlated) labels; in
    the correlated convention its components are reversed.
    """
    a = b4_vector(alpha)
    b = b4_vector(-alpha)
    if correlated:
        b = b[::-1]
    return ProjectorSpec(a), ProjectorSpec(b)


def interference_closed_form(alpha, theta0, theta2):
    """Coincidence probability of the phased MES under the scan projectors."""
    alpha, theta0, theta2 = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(theta0, float), np.asarray(theta2, float)
    )
    return (3.0 + 2.0 * (np.cos(alpha - theta0) + np.cos(2 * alpha - theta2) + np.cos(alpha + theta0 - theta2))) / 27.0


def interference_curve(
    state,
    alpha: float,
    scan: str = "theta2",
    fixed: float = 0.0,
    samples: int = 101,
    start: float = 0.0,
    stop: float = 2 * math.pi,
):
    """Coincidence probability while one pump phase sweeps ``[start, stop]``.

    ``state`` is the unphased state; the swept and fixed phases are imprinted
    on ``|0,0>`` (theta0) and ``|1,1>`` (theta2) before projecting.
    Returns ``(phases, probabilities)``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if scan not in ("theta0", "theta2"):
        raise ValueError(f"scan must be 'theta0' or 'theta2', got {scan!r}")
    pa, pb = interference_projectors(alpha)
    phases = np.linspace(start, stop, samples)
    probs = np.empty(samples)
    for k, th in enumerate(phases):
        t0, t2 = (th, fixed) if scan == "theta0" else (fixed, th)
        probs[k] = coincidence_probability(with_pump_phases(state, t0, t2), pa, pb)
    return phases, probs


def visibility(series) -> float:
    """``(max - min) / (max + min)``; 0 for an all-zero series."""
    if isinstance(series, tuple) and len(series) == 2:
        series = series[1]
    y = np.asarray(series, dtype=float)
    if y.size == 0:
        raise ValueError("empty series")
    hi, lo = float(y.max()), float(y.min())
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def calibrate_rate(probabilities, target_counts: float = 300.0, integration_time: float = 20.0) -> float:
    """Rate scale putting ``target_counts`` on the brightest projector pair."""
    pmax = float(np.max(probabilities))
    if pmax <= 0:
        raise ValueError("all probabilities are zero")
    return target_counts / (pmax * integration_time)


def simulate_counts(
    probabilities,
    rate_scale: float,
    integration_time: float,
    seed: int,
    projectors: Sequence | None = None,
) -> list:
    """Poisson coincidence counts with mean ``p * rate_scale * integration_time``.

    Uses NumPy's PCG64 generator seeded with ``seed``; the same seed gives the
    same counts.
    """
    if not rate_scale > 0 or not integration_time > 0:
        raise ValueError("rate_scale and integration_time must be positive")
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, 1.0)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(p * rate_scale * integration_time)
    labels = list(projectors) if projectors is not None else list(range(len(p)))
    return [
        CountRecord(lab, float(pk), int(nk), float(integration_time), float(rate_scale))
        for lab, pk, nk in zip(labels, p, counts)
    ]


@dataclass
class FitResult:
    theta0: float
    theta2: float
    scale: float
    residual: float
    stderr: tuple
    ci95: tuple
    background: float = 0.0

    def to_dict(self) -> dict:
        return {
            "theta0": self.theta0,
            "theta2": self.theta2,
            "scale": self.scale,
            "background": self.background,
            "rms_residual": self.residual,
            "stderr": list(self.stderr),
            "ci95_halfwidth": list(self.ci95),
        }


def _wrap(x: float) -> float:
    return float(np.mod(x, 2 * math.pi))


def fit_offset_phases(
    alpha,
    theta0_set,
    theta2_set,
    values,
    sigma=None,
    max_rel_residual: float = 0.5,
    starts: int = 6,
    background: bool = True,
) -> FitResult:
    """Least-squares estimate of the state's intrinsic phases from scan data.

    Each sample ``k`` was taken with projector parameter ``alpha[k]`` and pump
    phases ``(theta0_set[k], theta2_set[k])``; the model is
    ``scale * 27 * interference_closed_form(alpha, theta0_set + theta0, theta2_set + theta2) + b``,
    where the constant ``b`` absorbs a white-noise floor (fixed at 0 when
    ``background`` is false).
    ``sigma`` gives per-sample standard deviations (use ``sqrt(counts)`` for
    Poisson data). Raises :class:`FitDiverged` when the RMS residual exceeds
    ``max_rel_residual`` times the RMS of the data.
    """
    alpha, t0s, t2s, y = np.broadcast_arrays(
        np.asarray(alpha, float), np.asarray(theta0_set, float), np.asarray(theta2_set, float), np.asarray(values, float)
    )
    if y.size < 6:
        raise ValueError("need at least 6 samples")
    sig = np.ones_like(y) if sigma is None else np.broadcast_to(np.asarray(sigma, float), y.shape)

    def shape(th):
        return 27.0 * interference_closed_form(alpha, t0s + th[0], t2s + th[1])

    npar = 4 if background else 3

    def model(params):
        out = params[2] * shape(params[:2])
        return out + params[3] if background else out

    def resid(params):
        return (model(params) - y) / sig

    best = None
    grid = np.linspace(0, 2 * math.pi, starts, endpoint=False)
    for g0 in grid:
        for g2 in grid:
            f = shape((g0, g2))
            s0 = float(np.dot(f / sig**2, y) / max(np.dot(f / sig**2, f), 1e-300))
            x0 = [g0, g2, s0, 0.0][:npar]
            sol = least_squares(resid, x0=x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
            if best is None or sol.cost < best.cost:
                best = sol
    th0, th2, scale = best.x[:3]
    raw = model(best.x) - y
    rms = float(np.sqrt(np.mean(raw**2)))
    ref = float(np.sqrt(np.mean(y**2)))
    if ref > 0 and rms > max_rel_residual * ref:
        raise FitDiverged(f"RMS residual {rms:.3g} exceeds {max_rel_residual} x data RMS {ref:.3g}")

    J = best.jac
    dof = max(1, y.size - npar)
    chi2_red = 2.0 * best.cost / dof
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((npar, npar), np.nan)
    # known sigmas: use the covariance as is; unit weights: rescale by residual variance
    if sigma is None:
        cov = cov * chi2_red
    se = np.sqrt(np.abs(np.diag(cov)))
    return FitResult(
        theta0=_wrap(th0),
        theta2=_wrap(th2),
        scale=float(scale),
        residual=rms,
        stderr=(float(se[0]), float(se[1])),
        ci95=(float(1.96 * se[0]), float(1.96 * se[1])),
        background=float(best.x[3]) if background else 0.0,
    )
