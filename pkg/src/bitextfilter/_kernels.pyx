# cython: language_level=3, boundscheck=False, wraparound=False
# distutils: language = c++
"""Compiled hot loops. Must stay behaviourally identical to ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from cpython.unicode cimport Py_UNICODE_ISSPACE
from libc.stdint cimport uint64_t, int64_t
from libc.string cimport memcpy
from libcpp.algorithm cimport nth_element
from libcpp.vector cimport vector

cnp.import_array()

cdef struct Rec:
    double score
    int64_t id
    Py_ssize_t pos


cdef bint _before(const Rec& a, const Rec& b) noexcept nogil:
    # total order: score descending, then id ascending
    if a.score > b.score:
        return True
    if a.score < b.score:
        return False
    return a.id < b.id


cdef inline uint64_t _key(double x) noexcept nogil:
    cdef uint64_t bits
    x = x + 0.0  # -0.0 -> 0.0
    memcpy(&bits, &x, 8)
    if bits >> 63:
        return ~bits
    return bits | (<uint64_t>1 << 63)


def sortable_keys(const double[::1] scores):
    cdef Py_ssize_t i, n = scores.shape[0]
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _key(scores[i])
    return out


def prefix_histogram(const uint64_t[::1] keys, uint64_t prefix, int prefix_bits, int bits):
    cdef Py_ssize_t i, n = keys.shape[0]
    cdef int shift = 64 - prefix_bits - bits
    cdef uint64_t mask = (<uint64_t>1 << bits) - 1
    cdef uint64_t k
    out = np.zeros(1 << bits, dtype=np.int64)
    cdef int64_t[::1] h = out
    with nogil:
        for i in range(n):
            k = keys[i]
            if prefix_bits > 0 and (k >> (64 - prefix_bits)) != prefix:
                continue
            h[(k >> shift) & mask] += 1
    return out


def top_k_mask(const double[::1] scores, const int64_t[::1] ids, Py_ssize_t k):
    cdef Py_ssize_t i, n = scores.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    if k <= 0:
        return out
    if k >= n:
        out[:] = True
        return out
    cdef cnp.npy_bool[::1] m = out
    cdef vector[Rec] recs
    recs.resize(n)
    with nogil:
        for i in range(n):
            recs[i].score = scores[i] + 0.0
            recs[i].id = ids[i]
            recs[i].pos = i
        nth_element(recs.begin(), recs.begin() + (k - 1), recs.end(), &_before)
        for i in range(k):
            m[recs[i].pos] = 1
    return out


def token_counts(list texts):
    cdef Py_ssize_t i, n = len(texts)
    cdef int64_t count
    cdef bint inside
    cdef Py_UCS4 c
    cdef str s
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    for i in range(n):
        s = texts[i]
        count = 0
        inside = False
        for c in s:
            if Py_UNICODE_ISSPACE(c):
                inside = False
            elif not inside:
                inside = True
                count += 1
        o[i] = count
    return out


def char_counts(list texts):
    cdef Py_ssize_t i, n = len(texts)
    cdef int64_t count
    cdef Py_UCS4 c
    cdef str s
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    for i in range(n):
        s = texts[i]
        count = 0
        for c in s:
            if not Py_UNICODE_ISSPACE(c):
                count += 1
        o[i] = count
    return out
