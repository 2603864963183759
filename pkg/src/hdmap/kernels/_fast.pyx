# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled demapping kernels: fused loops over the per-symbol code tables."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p

cdef double NEG_INF = float("-inf")


cdef inline double _logsig(double x) noexcept nogil:
    if x < 0.0:
        return x - log1p(exp(x))
    return -log1p(exp(-x))


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def sym_logprobs(const double[:, ::1] logits, table, double[:, ::1] out):
    cdef const cnp.int64_t[::1] indptr = table.indptr
    cdef const cnp.int64_t[::1] indices = table.indices
    cdef const unsigned char[::1] bitvals = table.bitvals
    cdef Py_ssize_t n = logits.shape[0], r = logits.shape[1], m = out.shape[1]
    cdef Py_ssize_t i, s, j, k
    cdef double acc
    lsp_buf = np.empty(r, dtype=np.float64)
    lsn_buf = np.empty(r, dtype=np.float64)
    cdef double[::1] lsp = lsp_buf
    cdef double[::1] lsn = lsn_buf
    with nogil:
        for i in range(n):
            for k in range(r):
                lsp[k] = _logsig(logits[i, k])
                lsn[k] = _logsig(-logits[i, k])
            for s in range(m):
                acc = 0.0
                for j in range(indptr[s], indptr[s + 1]):
                    if bitvals[j]:
                        acc += lsp[indices[j]]
                    else:
                        acc += lsn[indices[j]]
                out[i, s] = acc
    return out


def bit_llrs(const double[:, ::1] slp, bitmap, double llr_max, double[:, ::1] out):
    cdef const cnp.int64_t[::1] op = bitmap.ones_indptr
    cdef const cnp.int64_t[::1] oi = bitmap.ones_idx
    cdef const cnp.int64_t[::1] zp = bitmap.zeros_indptr
    cdef const cnp.int64_t[::1] zi = bitmap.zeros_idx
    cdef Py_ssize_t n = slp.shape[0], b = out.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double l1, l0, v
    with nogil:
        for i in range(n):
            for j in range(b):
                l1 = _lse_subset(slp, i, oi, op[j], op[j + 1])
                l0 = _lse_subset(slp, i, zi, zp[j], zp[j + 1])
                v = l1 - l0
                if v != v:  # both sides empty: 0/0, define as 0
                    v = 0.0
                if v > llr_max:
                    v = llr_max
                elif v < -llr_max:
                    v = -llr_max
                out[i, j] = v
    return out


cdef inline double _lse_subset(
    const double[:, ::1] slp, Py_ssize_t row, const cnp.int64_t[::1] idx,
    cnp.int64_t lo, cnp.int64_t hi,
) noexcept nogil:
    cdef cnp.int64_t t
    cdef double m = NEG_INF, acc = 0.0, v
    if hi == lo:
        return NEG_INF
    for t in range(lo, hi):
        v = slp[row, idx[t]]
        if v > 0.0:
            v = 0.0
        if v > m:
            m = v
    for t in range(lo, hi):
        v = slp[row, idx[t]]
        if v > 0.0:
            v = 0.0
        acc += exp(v - m)
    return m + log(acc)


def awgn_sym_logprobs(
    const double complex[::1] rx,
    const double complex[::1] points,
    const double[::1] noise_var,
    double[:, ::1] out,
):
    cdef Py_ssize_t n = rx.shape[0], m = points.shape[0]
    cdef Py_ssize_t i, s
    cdef double dr, di, inv, mx, acc
    with nogil:
        for i in range(n):
            inv = 1.0 / noise_var[i]
            mx = NEG_INF
            for s in range(m):
                dr = rx[i].real - points[s].real
                di = rx[i].imag - points[s].imag
                out[i, s] = -(dr * dr + di * di) * inv
                if out[i, s] > mx:
                    mx = out[i, s]
            acc = 0.0
            for s in range(m):
                acc += exp(out[i, s] - mx)
            acc = mx + log(acc)
            for s in range(m):
                out[i, s] -= acc
    return out


def hard_decision(
    const double complex[::1] rx, const double complex[::1] points, cnp.int64_t[::1] out
):
    cdef Py_ssize_t n = rx.shape[0], m = points.shape[0]
    cdef Py_ssize_t i, s, best
    cdef double dr, di, d2, bd
    with nogil:
        for i in range(n):
            best = 0
            bd = 1e308
            for s in range(m):
                dr = rx[i].real - points[s].real
                di = rx[i].imag - points[s].imag
                d2 = dr * dr + di * di
                if d2 < bd:
                    bd = d2
                    best = s
            out[i] = best
    return out


def pseudo_loss(
    const double[:, ::1] logits,
    const unsigned char[:, ::1] code,
    const unsigned char[:, ::1] used,
    double[::1] out,
):
    cdef Py_ssize_t n = logits.shape[0], r = logits.shape[1]
    cdef Py_ssize_t i, k
    cdef double acc, z
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(r):
                if used[i, k]:
                    z = -logits[i, k] if code[i, k] else logits[i, k]
                    acc += _softplus(z)
            out[i] = acc
    return out
