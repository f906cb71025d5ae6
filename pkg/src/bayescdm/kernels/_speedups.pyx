# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython implementations of the hot sampler kernels (see `_numpy` for contracts)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p

cnp.import_array()

BACKEND = "cython"


def person_class_loglik(const unsigned char[:, ::1] y,
                        const double[:, ::1] log_p,
                        const double[:, ::1] log_q):
    cdef Py_ssize_t n = y.shape[0], i = y.shape[1], c = log_p.shape[0]
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t nn, cc, ii
    cdef double acc
    for nn in range(n):
        for cc in range(c):
            acc = 0.0
            for ii in range(i):
                if y[nn, ii]:
                    acc += log_p[cc, ii]
                else:
                    acc += log_q[cc, ii]
            out[nn, cc] = acc
    return out_arr


def draw_categorical_rows(const double[:, ::1] log_weights, const double[::1] u):
    cdef Py_ssize_t n = log_weights.shape[0], c = log_weights.shape[1]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t nn, cc
    cdef double m, total, target, acc
    for nn in range(n):
        m = log_weights[nn, 0]
        for cc in range(1, c):
            if log_weights[nn, cc] > m:
                m = log_weights[nn, cc]
        total = 0.0
        for cc in range(c):
            total += exp(log_weights[nn, cc] - m)
        target = u[nn] * total
        acc = 0.0
        out[nn] = c - 1
        for cc in range(c):
            acc += exp(log_weights[nn, cc] - m)
            if acc >= target:
                out[nn] = cc
                break
    return out_arr


def class_counts(const long long[::1] classes, const unsigned char[:, ::1] y, int n_classes):
    cdef Py_ssize_t n = y.shape[0], i = y.shape[1]
    m_arr = np.zeros(n_classes, dtype=np.float64)
    r_arr = np.zeros((n_classes, i), dtype=np.float64)
    cdef double[::1] m = m_arr
    cdef double[:, ::1] r = r_arr
    cdef Py_ssize_t nn, ii
    cdef long long cc
    for nn in range(n):
        cc = classes[nn]
        m[cc] += 1.0
        for ii in range(i):
            if y[nn, ii]:
                r[cc, ii] += 1.0
    return m_arr, r_arr


def bernoulli_loglik(const unsigned char[:, ::1] y, const double[:, ::1] p):
    cdef Py_ssize_t n = y.shape[0], i = y.shape[1]
    cdef double acc = 0.0
    cdef Py_ssize_t nn, ii
    for nn in range(n):
        for ii in range(i):
            if y[nn, ii]:
                acc += log(p[nn, ii])
            else:
                acc += log1p(-p[nn, ii])
    return acc


def pearson_pair(const unsigned char[:, ::1] y, const double[:, ::1] p,
                 const double[:, ::1] u):
    cdef Py_ssize_t n = y.shape[0], i = y.shape[1]
    cdef double realized = 0.0, replicated = 0.0
    cdef double pv, denom, diff
    cdef Py_ssize_t nn, ii
    for nn in range(n):
        for ii in range(i):
            pv = p[nn, ii]
            denom = pv * (1.0 - pv)
            diff = (1.0 - pv) if y[nn, ii] else (0.0 - pv)
            realized += diff * diff / denom
            diff = (1.0 - pv) if u[nn, ii] < pv else (0.0 - pv)
            replicated += diff * diff / denom
    return realized, replicated
