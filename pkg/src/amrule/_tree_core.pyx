# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree kernels: split scan and batch leaf routing.

Must stay arithmetically identical to _tree_backend_py (same float64
operations in the same order) so both backends grow the same trees.
"""

import numpy as np

cimport numpy as cnp

BACKEND = "compiled"


def scan_feature(double[::1] vals, cnp.int64_t[::1] cls):
    """See _tree_backend_py.scan_feature; identical contract and arithmetic."""
    cdef long np_f = vals.shape[0]
    if np_f < 2:
        return -1.0, 0.0, 0
    cdef long total1 = 0
    cdef long i
    for i in range(np_f):
        total1 += cls[i]
    cdef long total0 = np_f - total1
    cdef double np_d = <double> np_f
    cdef double a0 = (<double> total0) / np_d
    cdef double a1 = (<double> total1) / np_d
    cdef double gparent = 1.0 - a0 * a0 - a1 * a1

    cdef long c1 = 0
    cdef long best_i = -1
    cdef long best_nl = 0
    cdef double best_gain = 0.0
    cdef double n_l, n_r, p1_l, p0_l, p1_r, p0_r, a, b, gl, gr, child, gain
    cdef bint any_boundary = False

    for i in range(np_f - 1):
        c1 += cls[i]
        if vals[i] == vals[i + 1]:
            continue
        n_l = <double> (i + 1)
        p1_l = <double> c1
        p0_l = n_l - p1_l
        n_r = np_d - n_l
        p1_r = (<double> total1) - p1_l
        p0_r = n_r - p1_r
        a = p0_l / n_l
        b = p1_l / n_l
        gl = 1.0 - a * a - b * b
        a = p0_r / n_r
        b = p1_r / n_r
        gr = 1.0 - a * a - b * b
        child = (n_l * gl + n_r * gr) / np_d
        gain = gparent - child
        if not any_boundary or gain > best_gain:
            any_boundary = True
            best_gain = gain
            best_i = i
            best_nl = i + 1
    if not any_boundary:
        return -1.0, 0.0, 0
    cdef double threshold = (vals[best_i] + vals[best_i + 1]) / 2.0
    return best_gain, threshold, best_nl


def predict_classes(cnp.int64_t[::1] feature, double[::1] threshold,
                    cnp.int64_t[::1] left, cnp.int64_t[::1] right,
                    cnp.int64_t[::1] leaf_label, double[:, ::1] X):
    cdef long n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out_v = out
    cdef long row, node
    for row in range(n):
        node = 0
        while feature[node] >= 0:
            if X[row, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out_v[row] = leaf_label[node]
    return out
