# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: twisted orbit sums and Birkhoff orbit stepping."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, fmod

cnp.import_array()

IMPL = "cython"


def twisted_sums(cnp.ndarray[cnp.complex128_t, ndim=2] vprime,
                 cnp.ndarray[cnp.complex128_t, ndim=1] lam_m,
                 table):
    """Forward/backward twisted orbit sums; see the numpy twin for contracts."""
    cdef Py_ssize_t P = vprime.shape[0]
    cdef Py_ssize_t M = vprime.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] fwd = np.zeros((P, M), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] bwd = np.zeros((P, M), dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.ascontiguousarray(table.order_fwd)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] img = np.ascontiguousarray(table.img)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] jump = np.ascontiguousarray(table.jump)

    cdef Py_ssize_t i, q, k, n, t, j
    cdef double complex lam, inv, p, acc

    for q in range(M):
        lam = lam_m[q]
        inv = 1.0 / lam
        for i in range(order.shape[0]):
            n = order[i]
            t = img[n]
            acc = vprime[n, q] * inv
            if t >= 0:
                p = 1.0
                for k in range(jump[n]):
                    p = p * inv
                acc = acc + p * fwd[t, q]
            fwd[n, q] = acc
        # backward pass: descending rank == reverse forward order
        for i in range(order.shape[0] - 1, -1, -1):
            n = order[i]
            t = img[n]
            if t < 0:
                continue
            j = jump[n]
            p = 1.0
            for k in range(j - 1):
                p = p * lam
            bwd[t, q] = lam * p * bwd[n, q] - p * vprime[n, q]
    return fwd, bwd


def birkhoff_orbits(cnp.ndarray[cnp.float64_t, ndim=2] points,
                    int n_steps,
                    cnp.ndarray[cnp.float64_t, ndim=2] linear,
                    cnp.ndarray[cnp.float64_t, ndim=1] shift,
                    cnp.ndarray[cnp.int64_t, ndim=2] modes,
                    cnp.ndarray[cnp.complex128_t, ndim=2] coeffs,
                    int d2):
    """Iterate x' = (L x + shift + P(x)) mod 1; see the numpy twin."""
    cdef Py_ssize_t K = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t S = modes.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.array(points, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc = np.zeros((K, d2), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] disp = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t step, orb, a, b, s
    cdef double phase, c, sn, two_pi = 6.283185307179586476925286766559
    cdef double re, im, v

    for orb in range(K):
        for step in range(n_steps):
            for a in range(d):
                v = shift[a] - x[orb, a]
                for b in range(d):
                    v += linear[a, b] * x[orb, b]
                disp[a] = v
            for s in range(S):
                phase = 0.0
                for b in range(d):
                    phase += modes[s, b] * x[orb, b]
                phase = two_pi * phase
                c = cos(phase)
                sn = sin(phase)
                for a in range(d):
                    re = coeffs[a, s].real
                    im = coeffs[a, s].imag
                    disp[a] += re * c - im * sn
            for a in range(d):
                if a >= d - d2:
                    acc[orb, a - (d - d2)] += disp[a]
                v = fmod(x[orb, a] + disp[a], 1.0)
                if v < 0.0:
                    v += 1.0
                x[orb, a] = v
    for orb in range(K):
        for a in range(d2):
            acc[orb, a] /= n_steps
    return x, acc
