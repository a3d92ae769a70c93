# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, lgamma, cos, sin, M_PI

cnp.import_array()


cdef inline double _laguerre(int p, double alpha, double x) noexcept nogil:
    cdef double prev = 1.0
    cdef double cur
    cdef double nxt
    cdef int k
    if p == 0:
        return 1.0
    cur = 1.0 + alpha - x
    for k in range(1, p):
        nxt = ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
        prev = cur
        cur = nxt
    return cur


cdef inline double _ipow(double b, int e) noexcept nogil:
    cdef double r = 1.0
    while e > 0:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


cdef inline double _norm(int l, int p) noexcept nogil:
    cdef int al = l if l >= 0 else -l
    return sqrt(2.0 * exp(lgamma(p + 1.0) - lgamma(p + al + 1.0)) / M_PI)


def overlap_batch(triples, w, kappa, gouy, zw, x, xw):
    cdef cnp.int64_t[:, ::1] T = np.ascontiguousarray(np.asarray(triples, dtype=np.int64).reshape(-1, 6))
    cdef double[:, ::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, ::1] K = np.ascontiguousarray(kappa, dtype=np.float64)
    cdef double[:, ::1] Gy = np.ascontiguousarray(gouy, dtype=np.float64)
    cdef double[::1] ZW = np.ascontiguousarray(zw, dtype=np.float64)
    cdef double[::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] XW = np.ascontiguousarray(xw, dtype=np.float64)

    cdef Py_ssize_t n = T.shape[0]
    cdef Py_ssize_t nz = ZW.shape[0]
    cdef Py_ssize_t nx = X.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] O = out

    # node tables shared by every triple
    U_arr = np.empty((3, nz, nx), dtype=np.float64)
    SU_arr = np.empty((3, nz, nx), dtype=np.float64)
    WC_arr = np.empty((nz, nx), dtype=np.float64)
    WS_arr = np.empty((nz, nx), dtype=np.float64)
    ZF_arr = np.empty(nz, dtype=np.float64)
    cdef double[:, :, ::1] U = U_arr
    cdef double[:, :, ::1] SU = SU_arr
    cdef double[:, ::1] WC = WC_arr
    cdef double[:, ::1] WS = WS_arr
    cdef double[::1] ZF = ZF_arr

    cdef Py_ssize_t t, iz, ix
    cdef int j, al
    cdef double A, B, r2, u, amp, G, pref, c, s
    cdef double acc_re, acc_im, tot_re, tot_im
    cdef double norms[3]
    cdef int ls[3]
    cdef int ps[3]
    cdef int als[3]
    cdef double sgn[3]
    sgn[0] = 1.0
    sgn[1] = -1.0
    sgn[2] = -1.0

    with nogil:
        for iz in range(nz):
            A = 1.0 / (W[0, iz] * W[0, iz]) + 1.0 / (W[1, iz] * W[1, iz]) + 1.0 / (W[2, iz] * W[2, iz])
            B = K[0, iz] - K[1, iz] - K[2, iz]
            ZF[iz] = ZW[iz] * M_PI / A
            for ix in range(nx):
                r2 = X[ix] / A
                WC[iz, ix] = XW[ix] * cos(-B * r2)
                WS[iz, ix] = XW[ix] * sin(-B * r2)
                for j in range(3):
                    u = 2.0 * r2 / (W[j, iz] * W[j, iz])
                    U[j, iz, ix] = u
                    SU[j, iz, ix] = sqrt(u)

        for t in range(n):
            for j in range(3):
                ls[j] = <int>T[t, 2 * j]
                ps[j] = <int>T[t, 2 * j + 1]
                als[j] = ls[j] if ls[j] >= 0 else -ls[j]
                norms[j] = _norm(ls[j], ps[j])
            tot_re = 0.0
            tot_im = 0.0
            for iz in range(nz):
                G = 0.0
                pref = 1.0
                for j in range(3):
                    G += sgn[j] * (als[j] + 2 * ps[j] + 1) * Gy[j, iz]
                    pref *= norms[j] / W[j, iz]
                acc_re = 0.0
                acc_im = 0.0
                for ix in range(nx):
                    amp = 1.0
                    for j in range(3):
                        al = als[j]
                        if al > 0:
                            amp *= _ipow(SU[j, iz, ix], al)
                        if ps[j] > 0:
                            amp *= _laguerre(ps[j], <double>al, U[j, iz, ix])
                    acc_re += amp * WC[iz, ix]
                    acc_im += amp * WS[iz, ix]
                c = cos(G) * pref * ZF[iz]
                s = sin(G) * pref * ZF[iz]
                tot_re += acc_re * c - acc_im * s
                tot_im += acc_re * s + acc_im * c
            O[t].real = tot_re
            O[t].imag = tot_im
    return out
