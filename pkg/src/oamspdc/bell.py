"""CGLMP Bell test for two d-level OAM systems.

Measurement outcome ``v`` of arm A under setting ``a`` projects onto
``(1/sqrt d) sum_j exp(i theta_A j) |j>`` with
``theta_A = (2 pi / d) tau_a (v + a/2)``; arm B uses
``theta_B = (2 pi / d) tau_b (-w + (-1)^b / 4)``. The basis index
``j = l + floor(d/2)`` maps OAM labels onto ``0..d-1``. With
``tau_a = tau_b = 1`` these are the standard CGLMP Fourier settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ZeroBlock

__all__ = [
    "EXPERIMENT_TAU",
    "STANDARD_TAU",
    "BellSettings",
    "bell_measurement_state",
    "joint_probability_table",
    "cglmp_coefficients",
    "cglmp_s",
    "coincidence_surface",
    "fringe_period",
    "optimize_settings",
    "deterministic_table",
    "local_deterministic_values",
    "cglmp_bootstrap_std",
    "counts_to_table",
]

EXPERIMENT_TAU = 4.2 / (2 * math.pi)
STANDARD_TAU = 1.0


@dataclass(frozen=True)
class BellSettings:
    d: int = 3
    tau_a: float = EXPERIMENT_TAU
    tau_b: float = EXPERIMENT_TAU

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not (self.tau_a > 0 and self.tau_b > 0):
            raise ValueError("tau values must be positive")

    @classmethod
    def standard(cls, d: int = 3) -> "BellSettings":
        return cls(d, STANDARD_TAU, STANDARD_TAU)

    @classmethod
    def experiment(cls, d: int = 3) -> "BellSettings":
        return cls(d, EXPERIMENT_TAU, EXPERIMENT_TAU)

    def theta_a(self, a: int, v: int) -> float:
        return 2 * math.pi / self.d * self.tau_a * (v + a / 2)

    def theta_b(self, b: int, w: int) -> float:
        return 2 * math.pi / self.d * self.tau_b * (-w + (-1) ** b / 4)


def _angular_state(theta: float, d: int) -> np.ndarray:
    return np.exp(1j * theta * np.arange(d)) / math.sqrt(d)


def bell_measurement_state(arm: str, outcome: int, setting: int, settings: BellSettings) -> np.ndarray:
    if not 0 <= outcome < settings.d:
        raise ValueError(f"outcome {outcome} outside 0..{settings.d - 1}")
    if setting not in (0, 1):
        raise ValueError("setting must be 0 or 1")
    if arm == "A":
        theta = settings.theta_a(setting, outcome)
    elif arm == "B":
        theta = settings.theta_b(setting, outcome)
    else:
        raise ValueError(f"arm must be 'A' or 'B', got {arm!r}")
    return _angular_state(theta, settings.d)


def _density(state) -> np.ndarray:
    arr = np.asarray(state, dtype=complex)
    return np.outer(arr, arr.conj()) if arr.ndim == 1 else arr


def raw_coincidences(state, settings: BellSettings) -> np.ndarray:
    """Unnormalized ``C[a, b, v, w] = <A_a^v B_b^w| rho |A_a^v B_b^w>``."""
    d = settings.d
    rho = _density(state)
    if rho.shape != (d * d, d * d):
        raise ValueError(f"state must live in {d}x{d} dimensions, got {rho.shape}")
    A = np.array([[bell_measurement_state("A", v, a, settings) for v in range(d)] for a in range(2)])
    B = np.array([[bell_measurement_state("B", w, b, settings) for w in range(d)] for b in range(2)])
    # phi[a, b, v, w, :] = A[a, v] (x) B[b, w]
    phi = np.einsum("avi,bwj->abvwij", A, B).reshape(2, 2, d, d, d * d)
    C = np.einsum("abvwi,ij,abvwj->abvw", phi.conj(), rho, phi)
    return np.clip(C.real, 0.0, None)


def joint_probability_table(state, settings: BellSettings) -> np.ndarray:
    """``P[a, b, i, j]``: coincidences normalized within each setting block."""
    C = raw_coincidences(state, settings)
    sums = C.sum(axis=(2, 3), keepdims=True)
    if np.any(sums < 1e-300):
        raise ZeroBlock("a setting block has no coincidences")
    return C / sums


def counts_to_table(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    sums = counts.sum(axis=(-2, -1), keepdims=True)
    if np.any(sums < 1e-300):
        raise ZeroBlock("a setting block has no coincidences")
    return counts / sums


def cglmp_coefficients(d: int) -> np.ndarray:
    """Weights ``W[a, b, i, j]`` with ``S_d = sum W * P``; outcome arithmetic mod d."""
    W = np.zeros((2, 2, d, d))
    i = np.arange(d)[:, None]
    j = np.arange(d)[None, :]

    def ev(expr, target):
        return ((expr - target) % d == 0).astype(float)

    for k in range(d // 2):
        wk = 1.0 - 2.0 * k / (d - 1)
        W[0, 0] += wk * (ev(i - j, k) - ev(i - j, -k - 1))
        W[1, 0] += wk * (ev(j - i, k + 1) - ev(j - i, -k))
        W[1, 1] += wk * (ev(i - j, k) - ev(i - j, -k - 1))
        W[0, 1] += wk * (ev(j - i, k) - ev(j - i, -k - 1))
    return W


def cglmp_s(table, d: int | None = None) -> float | np.ndarray:
    """CGLMP value for one table ``(2, 2, d, d)`` or a stack ``(..., 2, 2, d, d)``."""
    P = np.asarray(table, dtype=float)
    d = d or P.shape[-1]
    W = cglmp_coefficients(d)
    S = np.tensordot(P, W, axes=([-4, -3, -2, -1], [0, 1, 2, 3]))
    return float(S) if np.ndim(S) == 0 else S


def deterministic_table(strategy, d: int) -> np.ndarray:
    """Table of the local strategy ``(A_0, A_1, B_0, B_1)`` with fixed outcomes."""
    a0, a1, b0, b1 = strategy
    P = np.zeros((2, 2, d, d))
    for a, ai in enumerate((a0, a1)):
        for b, bj in enumerate((b0, b1)):
            P[a, b, ai, bj] = 1.0
    return P


def local_deterministic_values(strategies, d: int) -> np.ndarray:
    """CGLMP values for an ``(n, 4)`` array of deterministic outcome assignments."""
    s = np.asarray(strategies, dtype=np.int64).reshape(-1, 4)
    W = cglmp_coefficients(d)
    return W[0, 0, s[:, 0], s[:, 2]] + W[0, 1, s[:, 0], s[:, 3]] + W[1, 0, s[:, 1], s[:, 2]] + W[1, 1, s[:, 1], s[:, 3]]


def coincidence_surface(state, settings: BellSettings, resolution: int = 64) -> dict:
    """Coincidence over a grid of the two continuous measurement angles.

    Returns the grid axes (``theta_a``, ``theta_b`` in ``[0, 2 pi)``), the
    ``values`` matrix indexed ``[theta_a, theta_b]`` and the 36 setting
    points ``(a, b, v, w, theta_A, theta_B, value)`` grouped by ``(a, b)``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    d = settings.d
    rho = _density(state)
    th = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
    basis = np.exp(1j * np.outer(th, np.arange(d))) / math.sqrt(d)  # (n, d)
    phi = np.einsum("xi,yj->xyij", basis, basis).reshape(resolution, resolution, d * d)
    vals = np.einsum("xyi,ij,xyj->xy", phi.conj(), rho, phi).real
    markers = []
    for a in range(2):
        for b in range(2):
            for v in range(d):
                for w in range(d):
                    ta, tb = settings.theta_a(a, v), settings.theta_b(b, w)
                    pa = _angular_state(ta, d)
                    pb = _angular_state(tb, d)
                    p = np.kron(pa, pb)
                    markers.append(
                        {"a": a, "b": b, "v": v, "w": w, "theta_a": ta, "theta_b": tb,
                         "value": float(np.real(np.vdot(p, rho @ p)))}
                    )
    return {"theta_a": th, "theta_b": th, "values": np.clip(vals, 0.0, 1.0), "markers": markers}


def surface_value(state, theta_a: float, theta_b: float, d: int = 3) -> float:
    rho = _density(state)
    p = np.kron(_angular_state(theta_a, d), _angular_state(theta_b, d))
    return float(np.real(np.vdot(p, rho @ p)))


def fringe_period(theta, values, harmonics: int = 2, candidates=None) -> float:
    """Period of a fringe cut, by least-squares Fourier fits over trial periods.

    The trial period minimising the residual of a ``harmonics``-term Fourier
    series wins; a golden-section refinement follows.
    """
    theta = np.asarray(theta, float)
    y = np.asarray(values, float)
    span = theta.max() - theta.min()
    if candidates is None:
        candidates = np.linspace(span / 6, span, 400)

    def resid(T):
        cols = [np.ones_like(theta)]
        for h in range(1, harmonics + 1):
            cols += [np.cos(2 * math.pi * h * theta / T), np.sin(2 * math.pi * h * theta / T)]
        M = np.stack(cols, axis=1)
        coef, *_ = np.linalg.lstsq(M, y, rcond=None)
        return float(np.sum((M @ coef - y) ** 2))

    r = np.array([resid(T) for T in candidates])
    k = int(np.argmin(r))
    lo = candidates[max(k - 1, 0)]
    hi = candidates[min(k + 1, len(candidates) - 1)]
    g = (math.sqrt(5) - 1) / 2
    for _ in range(80):
        m1, m2 = hi - g * (hi - lo), lo + g * (hi - lo)
        if resid(m1) < resid(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def _s_at(state, d, ta, tb) -> float:
    return cglmp_s(joint_probability_table(state, BellSettings(d, ta, tb)), d)


def optimize_settings(state, d: int = 3, bounds=((0.2, 3.0), (0.2, 3.0)), grid: int = 29, tol: float = 1e-9):
    """Maximize S over ``(tau_a, tau_b)``: coarse grid, then pattern search.

    Deterministic for fixed ``grid`` and ``bounds``. Returns ``(S_max, settings)``.
    """
    (alo, ahi), (blo, bhi) = bounds
    if not (0 < alo < ahi and 0 < blo < bhi):
        raise ValueError(f"invalid bounds {bounds}")
    ta_grid = np.linspace(alo, ahi, grid)
    tb_grid = np.linspace(blo, bhi, grid)
    best = (-np.inf, alo, blo)
    for ta in ta_grid:
        for tb in tb_grid:
            s = _s_at(state, d, ta, tb)
            if s > best[0]:
                best = (s, ta, tb)

    s, x, y = best
    step = max((ahi - alo), (bhi - blo)) / (grid - 1)
    while step > tol:
        moved = False
        for dx, dy in ((step, 0), (-step, 0), (0, step), (0, -step)):
            nx, ny = min(max(x + dx, alo), ahi), min(max(y + dy, blo), bhi)
            ns = _s_at(state, d, nx, ny)
            if ns > s + 1e-15:
                s, x, y, moved = ns, nx, ny, True
                break
        if not moved:
            step /= 2
    return float(s), BellSettings(d, float(x), float(y))


def cglmp_bootstrap_std(counts, resamples: int = 500, seed: int = 0) -> float:
    """Standard deviation of S under Poisson resampling of ``counts[a, b, i, j]``."""
    counts = np.asarray(counts, dtype=float)
    rng = np.random.default_rng(seed)
    sims = rng.poisson(np.broadcast_to(counts, (resamples,) + counts.shape)).astype(float)
    sums = sims.sum(axis=(-2, -1), keepdims=True)
    sums[sums == 0] = 1.0
    vals = cglmp_s(sims / sums, counts.shape[-1])
    return float(np.std(vals, ddof=1))


def with_tau(settings: BellSettings, tau_a: float, tau_b: float) -> BellSettings:
    return replace(settings, tau_a=tau_a, tau_b=tau_b)
