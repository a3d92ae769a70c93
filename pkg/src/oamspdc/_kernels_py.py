"""Pure-NumPy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` exactly in signature and semantics; used when the
compiled extension is unavailable or ``OAMSPDC_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np


def _laguerre(p, alpha, x):
    prev = np.ones_like(x)
    if p == 0:
        return prev
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def _norm(l, p):
    return math.sqrt(2.0 * math.exp(math.lgamma(p + 1.0) - math.lgamma(p + abs(l) + 1.0)) / math.pi)


def overlap_batch(triples, w, kappa, gouy, zw, x, xw):
    """Overlap integrals for a batch of conserving mode triples.

    Parameters
    ----------
    triples : int array (n, 6)
        Rows ``(l_p, p_p, l_s, p_s, l_i, p_i)``.
    w, kappa, gouy : float arrays (3, nz)
        Beam radius, curvature coefficient ``k z / (2 (z^2 + z_r^2))`` and
        ``atan(z / z_r)`` at each z node, rows ordered pump, signal, idler.
    zw : float array (nz,)
        z quadrature weights (already scaled to the crystal length).
    x, xw : float arrays (nx,)
        Gauss-Laguerre nodes and weights.

    Returns
    -------
    complex array (n,)
        ``int dz int r dr 2 pi LG_p conj(LG_s) conj(LG_i)``.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 6)
    w = np.asarray(w, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    gouy = np.asarray(gouy, dtype=float)
    zw = np.asarray(zw, dtype=float)
    x = np.asarray(x, dtype=float)
    xw = np.asarray(xw, dtype=float)

    A = (1.0 / w**2).sum(axis=0)
    B = kappa[0] - kappa[1] - kappa[2]
    r2 = x[None, :] / A[:, None]
    osc = np.exp(-1j * B[:, None] * r2) * xw[None, :]
    # conjugated beams enter the Gouy phase with a minus sign
    sign = np.array([1.0, -1.0, -1.0])

    out = np.empty(len(triples), dtype=complex)
    for n, row in enumerate(triples):
        f = osc.copy()
        G = np.zeros_like(zw)
        for j in range(3):
            l, p = int(row[2 * j]), int(row[2 * j + 1])
            al = abs(l)
            u = 2.0 * r2 / w[j][:, None] ** 2
            f = f * ((_norm(l, p) / w[j][:, None]) * u ** (0.5 * al) * _laguerre(p, al, u))
            G = G + sign[j] * (al + 2 * p + 1) * gouy[j]
        out[n] = np.sum(zw * (math.pi / A) * np.exp(1j * G) * f.sum(axis=1))
    return out
