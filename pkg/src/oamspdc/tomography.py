"""Two-qutrit state tomography with mutually unbiased bases.

Linear inversion expands the state on ``lambda_j (x) lambda_k`` (eight
Gell-Mann matrices plus ``sqrt(2/3) I``, all with ``Tr(lambda_j lambda_k) = 2
delta_jk``). Maximum likelihood uses the Cholesky-type parameterization
``rho = T^dagger T / Tr(T^dagger T)`` with lower-triangular ``T`` (81 real
parameters), which keeps every iterate positive semidefinite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import NonConvergence, RankDeficient, RankDeficientWarning

__all__ = [
    "MubSet",
    "TomographyCounts",
    "MleResult",
    "gell_mann_basis",
    "operator_basis",
    "mub_vectors",
    "build_mub_set",
    "expected_probabilities",
    "simulate_tomography",
    "linear_reconstruct",
    "mle_reconstruct",
    "fidelity",
    "linear_entropy",
    "bootstrap_errors",
    "rho_from_params",
    "params_from_rho",
]

D = 3
LIKELIHOOD_FLOOR = 1e-12


def gell_mann_basis(d: int = D) -> list:
    """Generalized Gell-Mann matrices followed by ``sqrt(2/d) I``; ``Tr(l_j l_k) = 2 delta``."""
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            mats.append(m)
    for j in range(1, d):
        diag = np.zeros(d)
        diag[:j] = 1.0
        diag[j] = -j
        mats.append(np.diag(diag * math.sqrt(2.0 / (j * (j + 1)))).astype(complex))
    mats.append(np.eye(d, dtype=complex) * math.sqrt(2.0 / d))
    return mats


def operator_basis(d: int = D) -> np.ndarray:
    """All ``lambda_j (x) lambda_k`` stacked into shape ``(d^4, d^2, d^2)``."""
    lam = gell_mann_basis(d)
    return np.array([np.kron(a, b) for a in lam for b in lam])


def mub_vectors(d: int = D) -> np.ndarray:
    """``d + 1`` mutually unbiased bases for prime ``d``, shape ``(d+1, d, d)``.

    Basis 0 is computational; basis ``k + 1`` holds
    ``(1/sqrt d) sum_l omega^(k l^2 + j l) |l>`` for ``j = 0..d-1``.
    """
    if d < 2 or any(d % q == 0 for q in range(2, int(math.isqrt(d)) + 1)):
        raise ValueError(f"quadratic-phase MUB construction needs prime d, got {d}")
    if d == 2:
        raise ValueError("use d >= 3 (odd prime) for this construction")
    omega = np.exp(2j * math.pi / d)
    l = np.arange(d)
    bases = [np.eye(d, dtype=complex)]
    for k in range(d):
        bases.append(np.array([omega ** ((k * l * l + j * l) % d) for j in range(d)]) / math.sqrt(d))
    return np.array(bases)


@dataclass
class MubSet:
    """Per-arm MUB states and the joint product projectors.

    ``arm_bases`` lists the basis indices (into :func:`mub_vectors`) measured
    on each arm; ``labels[n] = (basis_a, state_a, basis_b, state_b)`` names
    joint projector ``n`` whose vector is ``vectors[n]``.
    """

    d: int
    mode: str
    arm_bases: tuple
    arm_vectors: np.ndarray
    labels: list
    vectors: np.ndarray
    basis_sum: float = 1.0

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def projectors(self) -> np.ndarray:
        return np.einsum("ni,nj->nij", self.vectors, self.vectors.conj())


def build_mub_set(d: int = D, mode: str = "full144") -> MubSet:
    """``full144``: all four bases per arm. ``paper81``: the three Fourier-type bases."""
    if d != 3:
        raise ValueError("only d = 3 is supported")
    allb = mub_vectors(d)
    if mode == "full144":
        chosen = (0, 1, 2, 3)
    elif mode == "paper81":
        chosen = (1, 2, 3)
    else:
        raise ValueError(f"unknown MUB mode {mode!r}")
    labels, vecs = [], []
    for ba in chosen:
        for sa in range(d):
            for bb in chosen:
                for sb in range(d):
                    labels.append((ba, sa, bb, sb))
                    vecs.append(np.kron(allb[ba][sa], allb[bb][sb]))
    # every basis resolves the identity, so sum_n P_n = len(chosen)^2 * I
    return MubSet(d, mode, chosen, allb, labels, np.array(vecs), basis_sum=float(len(chosen) ** 2))


def expected_probabilities(rho, mub: MubSet) -> np.ndarray:
    V = mub.vectors
    return np.real(np.einsum("ni,ij,nj->n", V.conj(), np.asarray(rho, complex), V))


@dataclass
class TomographyCounts:
    labels: list
    counts: np.ndarray
    integration_time: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        self.integration_time = np.broadcast_to(
            np.asarray(self.integration_time, dtype=float), self.counts.shape
        ).copy()
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def rates(self) -> np.ndarray:
        return self.counts / self.integration_time


def simulate_tomography(rho, mub: MubSet, rate: float, time: float, seed: int | None) -> TomographyCounts:
    """Poisson counts with mean ``rate * time * Tr(P rho)``; ``seed=None`` gives the exact means."""
    p = np.clip(expected_probabilities(rho, mub), 0.0, None)
    mean = rate * time * p
    if seed is None:
        counts = mean
    else:
        counts = np.random.default_rng(seed).poisson(mean).astype(float)
    return TomographyCounts(list(mub.labels), counts, time)


def _design_matrix(mub: MubSet) -> np.ndarray:
    ops = operator_basis(mub.d)
    V = mub.vectors
    return np.real(np.einsum("ni,kij,nj->nk", V.conj(), ops, V))


def linear_reconstruct(counts: TomographyCounts, mub: MubSet, allow_rank_deficient: bool = False) -> np.ndarray:
    """Linear inversion ``rho = N sum_jk r_jk lambda_j (x) lambda_k``.

    ``r`` solves ``A r = n`` by least squares, where ``A[n, jk]`` is the
    expectation of ``lambda_j (x) lambda_k`` in projector ``n``. An
    informationally incomplete set raises :class:`RankDeficient` unless
    ``allow_rank_deficient``, in which case the least-norm solution is
    returned with a :class:`RankDeficientWarning`.
    """
    A = _design_matrix(mub)
    rank = np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A, 2))
    full = A.shape[1]
    if rank < full:
        msg = f"projector set has rank {rank} < {full}; not informationally complete"
        if not allow_rank_deficient:
            raise RankDeficient(msg)
        warnings.warn(msg + "; returning least-norm solution", RankDeficientWarning, stacklevel=2)
    rates = counts.rates
    r, *_ = np.linalg.lstsq(A, rates, rcond=None)
    ops = operator_basis(mub.d)
    rho = np.tensordot(r, ops, axes=(0, 0))
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if tr <= 0:
        raise ValueError("reconstruction has non-positive trace")
    return rho / tr


def _tril_indices(n: int):
    return np.tril_indices(n, -1)


def rho_from_params(t: np.ndarray, n: int = 9):
    """Build ``(rho, T, s)`` from the 81 real parameters (diagonal first, then re/im pairs)."""
    T = np.zeros((n, n), dtype=complex)
    T[np.diag_indices(n)] = t[:n]
    rows, cols = _tril_indices(n)
    m = len(rows)
    T[rows, cols] = t[n : n + m] + 1j * t[n + m : n + 2 * m]
    M = T.conj().T @ T
    s = np.trace(M).real
    return M / s, T, s


def params_from_rho(rho, jitter: float = 0.0) -> np.ndarray:
    """Inverse of :func:`rho_from_params` via a reversed Cholesky factorization."""
    rho = np.asarray(rho, complex)
    n = rho.shape[0]
    rho = 0.5 * (rho + rho.conj().T)
    J = np.eye(n)[::-1]
    eps = jitter
    for _ in range(30):
        try:
            L = np.linalg.cholesky(J @ (rho + eps * np.eye(n)) @ J)
            break
        except np.linalg.LinAlgError:
            eps = max(eps * 10, 1e-14)
    else:
        raise ValueError("could not factor initial density matrix")
    T = J @ L.conj().T @ J
    # T is lower triangular with real positive diagonal: rho = T^dagger T
    rows, cols = _tril_indices(n)
    t = np.concatenate([T[np.diag_indices(n)].real, T[rows, cols].real, T[rows, cols].imag])
    return t / math.sqrt(np.trace(T.conj().T @ T).real)


@dataclass
class MleResult:
    rho: np.ndarray
    value: float
    iterations: int
    grad_norm: float
    converged: bool
    method: str
    history: list = field(default_factory=list)


def _objective(t, V, n, N, dim):
    rho, T, s = rho_from_params(t, dim)
    p = np.real(np.einsum("ni,ij,nj->n", V.conj(), rho, V))
    pe = np.maximum(p, LIKELIHOOD_FLOOR)
    L = float(np.sum((N * pe - n) ** 2 / (2.0 * N * pe)))
    g = 0.5 * N - n**2 / (2.0 * N * pe**2)
    g = np.where(p > LIKELIHOOD_FLOOR, g, 0.0)
    # H = sum_j g_j (P_j - p_j I) / s, gradient dL/dT = 2 T H
    H = (np.einsum("n,ni,nj->ij", g, V, V.conj()) - np.sum(g * p) * np.eye(dim)) / s
    G = T @ H
    rows, cols = _tril_indices(dim)
    grad = np.concatenate([2 * G[np.diag_indices(dim)].real, 2 * G[rows, cols].real, 2 * G[rows, cols].imag])
    return L, grad


def likelihood(rho, counts: TomographyCounts, mub: MubSet) -> float:
    n = counts.rates
    N = n.sum() / mub.basis_sum
    p = np.maximum(expected_probabilities(rho, mub), LIKELIHOOD_FLOOR)
    return float(np.sum((N * p - n) ** 2 / (2.0 * N * p)))


def mle_reconstruct(
    counts: TomographyCounts,
    mub: MubSet,
    init=None,
    maxiter: int = 5000,
    gtol: float = 1e-10,
    full_output: bool = False,
):
    """Weighted least-squares likelihood fit over PSD, unit-trace states.

    Minimizes ``sum_j (N p_j - n_j)^2 / (2 N p_j)`` with ``p_j = <Psi_j|rho|Psi_j>``
    and ``N = sum_j n_j / sum_j Tr(P_j)``. L-BFGS with the analytic gradient
    runs first; if its line search fails, Powell's derivative-free method
    continues from the last iterate. The quasi-Newton stage stops when the
    relative decrease over the last 5 iterations (fewer at the
    start) drops below 1e-10 or the gradient
    norm falls below ``gtol``.
    """
    n = counts.rates
    if not np.any(n > 0):
        raise ValueError("all counts are zero")
    V = mub.vectors
    dim = V.shape[1]
    N = n.sum() / mub.basis_sum
    if init is None:
        with warnings.catch_warnings():
            # only a starting point; positivity pins down what the projectors miss
            warnings.simplefilter("ignore", RankDeficientWarning)
            init = linear_reconstruct(counts, mub, allow_rank_deficient=True)
        w, U = np.linalg.eigh(0.5 * (init + init.conj().T))
        w = np.clip(w, 1e-6, None)
        init = (U * w) @ U.conj().T
        init /= np.trace(init).real
    t0 = params_from_rho(init)

    history: list = []

    class _Stop(Exception):
        pass

    state = {"t": t0}

    def cb(xk):
        state["t"] = xk.copy()
        history.append(_objective(xk, V, n, N, dim)[0])
        k = len(history) - 1
        if k >= 2:
            old = history[-1 - min(k, 5)]
            if old > 0 and 0 <= (old - history[-1]) / old < 1e-10:
                raise _Stop

    method = "L-BFGS-B"
    f0, g0 = _objective(t0, V, n, N, dim)
    history.append(f0)
    if np.linalg.norm(g0) <= gtol:
        t, nit, ok = t0, 0, True
    else:
        try:
            res = minimize(
                _objective, t0, args=(V, n, N, dim), jac=True, method="L-BFGS-B", callback=cb,
                options={"maxiter": maxiter, "ftol": 0.0, "gtol": gtol, "maxcor": 30},
            )
            t, nit = res.x, res.nit
            ok = res.success or res.status == 0
            if not ok and "ABNORMAL" in str(res.message).upper():
                method = "L-BFGS-B+Powell"
                res2 = minimize(lambda x: _objective(x, V, n, N, dim)[0], t, method="Powell",
                                options={"maxiter": 20000, "xtol": 1e-10, "ftol": 1e-14})
                if res2.fun <= res.fun:
                    t = res2.x
                nit += res2.nit
                ok = True
        except _Stop:
            t, nit, ok = state["t"], len(history) - 1, True

    L, g = _objective(t, V, n, N, dim)
    gn = float(np.linalg.norm(g))
    if not ok:
        raise NonConvergence(f"MLE did not converge in {maxiter} iterations (|grad|={gn:.3e})", gn)
    rho, _, _ = rho_from_params(t, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    result = MleResult(rho, L, int(nit), gn, ok, method, history)
    return result if full_output else rho


def _sqrtm_psd(rho) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def _pure_vector(rho):
    """Dominant eigenvector when ``rho`` is a rank-one matrix, else ``rho`` unchanged."""
    if rho.ndim == 1:
        return rho
    w, U = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w[-1] > (1.0 - 1e-12) * w.sum():
        return U[:, -1] * math.sqrt(w[-1])
    return rho


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``, clipped to [0, 1]."""
    rho = np.asarray(rho, complex)
    sigma = np.asarray(sigma, complex)
    rho, sigma = _pure_vector(rho), _pure_vector(sigma)
    if sigma.ndim == 1:
        rho, sigma = sigma, rho
    if rho.ndim == 1:
        # pure argument: <psi|sigma|psi> exactly, no matrix square roots
        if sigma.ndim == 1:
            sigma = np.outer(sigma, sigma.conj())
        psi = rho / np.linalg.norm(rho)
        return min(1.0, max(0.0, float(np.real(psi.conj() @ sigma @ psi))))
    sr = _sqrtm_psd(rho)
    M = sr @ sigma @ sr
    w = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(1.0, max(0.0, f))


def linear_entropy(rho) -> float:
    rho = np.asarray(rho, complex)
    return float(1.0 - np.real(np.trace(rho @ rho)))


def bootstrap_errors(
    counts: TomographyCounts,
    mub: MubSet,
    resamples: int = 100,
    seed: int = 0,
    target=None,
    init=None,
    max_failure_fraction: float = 0.01,
) -> dict:
    """Poisson-bootstrap standard deviations of fidelity, linear entropy and elements.

    Each resample redraws every count from ``Poisson(observed)`` with its own
    seed spawned from ``seed`` and reruns the MLE.
    """
    if resamples < 100:
        raise ValueError("bootstrap needs at least 100 resamples")
    if init is None:
        init = mle_reconstruct(counts, mub)
    children = np.random.SeedSequence(seed).spawn(resamples)
    fids, ents, rhos = [], [], []
    failures = 0
    for child in children:
        rng = np.random.default_rng(child)
        sim = TomographyCounts(counts.labels, rng.poisson(counts.counts).astype(float), counts.integration_time)
        if not np.any(sim.counts > 0):
            failures += 1
            continue
        try:
            rho = mle_reconstruct(sim, mub, init=init)
        except NonConvergence:
            failures += 1
            continue
        rhos.append(rho)
        ents.append(linear_entropy(rho))
        if target is not None:
            fids.append(fidelity(target, rho))
    if failures > max_failure_fraction * resamples:
        raise NonConvergence(f"{failures} of {resamples} bootstrap fits failed")
    stack = np.array(rhos)
    return {
        "fidelity_std": float(np.std(fids, ddof=1)) if fids else float("nan"),
        "entropy_std": float(np.std(ents, ddof=1)),
        "element_std_real": np.std(stack.real, axis=0, ddof=1),
        "element_std_imag": np.std(stack.imag, axis=0, ddof=1),
        "failures": failures,
        "resamples": resamples,
    }
