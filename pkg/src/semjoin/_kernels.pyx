# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled match kernels. Keep in lockstep with _kernels_py.py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef double PHI = 0.6180339887498949

cdef uint64_t K1 = 0x9E3779B97F4A7C15ULL
cdef uint64_t K2 = 0xC2B2AE3D27D4EB4FULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL


cdef inline double _frac(double x) nogil:
    return x - floor(x)


def lattice_pairs(ids1, ids2, double sigma, double phase1, double phase2):
    cdef const int64_t[::1] v1 = np.ascontiguousarray(ids1, dtype=np.int64)
    cdef const int64_t[::1] v2 = np.ascontiguousarray(ids2, dtype=np.int64)
    cdef Py_ssize_t n1 = v1.shape[0], n2 = v2.shape[0], i, j, k = 0
    cdef double[::1] a = np.empty(n1, dtype=np.float64)
    cdef double[::1] b = np.empty(n2, dtype=np.float64)
    cdef double c
    for i in range(n1):
        a[i] = _frac(<double>v1[i] * PHI + phase1)
    for j in range(n2):
        b[j] = _frac(<double>v2[j] * sigma + phase2)

    cdef Py_ssize_t count = 0
    with nogil:
        for i in range(n1):
            for j in range(n2):
                c = a[i] + b[j]
                if c >= 1.0:
                    c = c - 1.0
                if c < sigma:
                    count += 1

    rows_arr = np.empty(count, dtype=np.int64)
    cols_arr = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] rows = rows_arr
    cdef int64_t[::1] cols = cols_arr
    with nogil:
        for i in range(n1):
            for j in range(n2):
                c = a[i] + b[j]
                if c >= 1.0:
                    c = c - 1.0
                if c < sigma:
                    rows[k] = i
                    cols[k] = j
                    k += 1
    return rows_arr, cols_arr


cdef inline uint64_t _mix(uint64_t x) nogil:
    x ^= x >> 30
    x *= M1
    x ^= x >> 27
    x *= M2
    x ^= x >> 31
    return x


cdef inline bint _hash_match(uint64_t h1, uint64_t h2, uint64_t seed, double sigma) nogil:
    cdef uint64_t x = _mix(h1 + h2 + seed)
    return <double>(x >> 11) * (1.0 / 9007199254740992.0) < sigma


def hash_pairs(ids1, ids2, double sigma, seed):
    cdef const int64_t[::1] v1 = np.ascontiguousarray(ids1, dtype=np.int64)
    cdef const int64_t[::1] v2 = np.ascontiguousarray(ids2, dtype=np.int64)
    cdef Py_ssize_t n1 = v1.shape[0], n2 = v2.shape[0], i, j, k = 0, count = 0
    cdef uint64_t s = <uint64_t>seed
    cdef uint64_t h1

    with nogil:
        for i in range(n1):
            h1 = (<uint64_t>v1[i]) * K1
            for j in range(n2):
                if _hash_match(h1, (<uint64_t>v2[j]) * K2, s, sigma):
                    count += 1

    rows_arr = np.empty(count, dtype=np.int64)
    cols_arr = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] rows = rows_arr
    cdef int64_t[::1] cols = cols_arr
    with nogil:
        for i in range(n1):
            h1 = (<uint64_t>v1[i]) * K1
            for j in range(n2):
                if _hash_match(h1, (<uint64_t>v2[j]) * K2, s, sigma):
                    rows[k] = i
                    cols[k] = j
                    k += 1
    return rows_arr, cols_arr


def emitted_prefix(Py_ssize_t n_matches, Py_ssize_t pair_tokens, Py_ssize_t max_output_tokens,
                   Py_ssize_t sentinel_tokens=1):
    if n_matches * pair_tokens + sentinel_tokens <= max_output_tokens:
        return n_matches, True
    if max_output_tokens < 0:
        max_output_tokens = 0
    return min(n_matches, max_output_tokens // pair_tokens), False
