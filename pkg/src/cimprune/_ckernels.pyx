# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contracts."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline bint _negative(int b, int c) noexcept nogil:
    return (b == 3) != (c == 3)


def rbl_popcount(qbits, kbits):
    cdef const unsigned char[::1] q = np.ascontiguousarray(qbits, dtype=np.uint8)
    cdef const unsigned char[:, :, ::1] k = np.ascontiguousarray(kbits, dtype=np.uint8)
    cdef Py_ssize_t n_tok = k.shape[0], dim = k.shape[2]
    out = np.zeros((n_tok, 4), dtype=np.int32)
    cdef int[:, ::1] o = out
    cdef Py_ssize_t t, c, n
    cdef int acc
    with nogil:
        for t in range(n_tok):
            for c in range(4):
                acc = 0
                for n in range(dim):
                    acc += q[n] & k[t, c, n]
                o[t, c] = acc
    return out


def bws_differential(droop):
    cdef const double[:, :, ::1] d = np.ascontiguousarray(droop, dtype=np.float64)
    cdef Py_ssize_t n_tok = d.shape[1]
    out = np.empty(n_tok, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t t
    cdef int b, c
    cdef double pos, neg, kpos, kneg, x
    with nogil:
        for t in range(n_tok):
            kpos = 0.0
            kneg = 0.0
            for c in range(4):
                pos = 0.0
                neg = 0.0
                for b in range(4):
                    x = d[b, t, c]
                    if _negative(b, c):
                        neg = 0.5 * neg + 0.5 * x
                        pos = 0.5 * pos
                    else:
                        pos = 0.5 * pos + 0.5 * x
                        neg = 0.5 * neg
                kpos = 0.5 * kpos + 0.5 * pos
                kneg = 0.5 * kneg + 0.5 * neg
            o[t] = kpos - kneg
    return out


def exact_scores(q, k_msb, k_lsb):
    cdef const signed char[::1] qv = np.ascontiguousarray(q, dtype=np.int8)
    cdef const signed char[:, ::1] km = np.ascontiguousarray(k_msb, dtype=np.int8)
    cdef const unsigned char[:, ::1] kl = np.ascontiguousarray(k_lsb, dtype=np.uint8)
    cdef Py_ssize_t n_tok = km.shape[0], dim = km.shape[1]
    out = np.empty(n_tok, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t t, n
    cdef long long acc
    with nogil:
        for t in range(n_tok):
            acc = 0
            for n in range(dim):
                acc += <long long>qv[n] * (16 * <long long>km[t, n] + <long long>kl[t, n])
            o[t] = acc
    return out
