# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled routing hot loops: per-row top-k selection and grouped
selection counting. Mirrors _pyref.py exactly, including the
lowest-index tie-break."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def topk_rows(object probs_in, int k):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] probs = \
        np.ascontiguousarray(probs_in, dtype=np.float64)
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t e = probs.shape[1]
    if k < 1 or k > e:
        raise ValueError(f"topk_rows: k={k} outside [1, {e}]")

    sel_arr = np.empty((n, k), dtype=np.int64)
    mask_arr = np.zeros((n, e), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] sel = sel_arr
    cdef cnp.float64_t[:, ::1] mask = mask_arr
    cdef cnp.float64_t[:, ::1] p = probs

    cdef Py_ssize_t i, j, m, worst, tmp_i, a, b
    cdef double v, worst_v
    cdef cnp.int64_t[::1] kept_i = np.empty(k, dtype=np.int64)
    cdef double[::1] kept_v = np.empty(k, dtype=np.float64)

    for i in range(n):
        for j in range(k):
            kept_i[j] = j
            kept_v[j] = p[i, j]
        # worst kept slot: smallest value; among equals the largest index,
        # because that is the entry a strictly larger candidate evicts first
        worst = 0
        for j in range(1, k):
            if kept_v[j] < kept_v[worst] or (
                kept_v[j] == kept_v[worst] and kept_i[j] > kept_i[worst]
            ):
                worst = j
        for j in range(k, e):
            v = p[i, j]
            if v > kept_v[worst]:
                kept_v[worst] = v
                kept_i[worst] = j
                worst = 0
                for m in range(1, k):
                    if kept_v[m] < kept_v[worst] or (
                        kept_v[m] == kept_v[worst] and kept_i[m] > kept_i[worst]
                    ):
                        worst = m
        # ascending index order within the row (insertion sort, k is tiny)
        for a in range(1, k):
            tmp_i = kept_i[a]
            b = a
            while b > 0 and kept_i[b - 1] > tmp_i:
                kept_i[b] = kept_i[b - 1]
                b -= 1
            kept_i[b] = tmp_i
        for j in range(k):
            sel[i, j] = kept_i[j]
            mask[i, kept_i[j]] = 1.0

    return sel_arr, mask_arr


def selection_counts(object selected_in, object groups_in, int n_experts, int n_groups=2):
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] selected = \
        np.ascontiguousarray(selected_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] groups = \
        np.ascontiguousarray(groups_in, dtype=np.int64)
    cdef Py_ssize_t n = selected.shape[0]
    cdef Py_ssize_t k = selected.shape[1]
    if groups.shape[0] != n:
        raise ValueError("selection_counts: group labels do not match rows")

    counts_arr = np.zeros((n_groups, n_experts), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] counts = counts_arr
    cdef cnp.int64_t[:, ::1] sel = selected
    cdef cnp.int64_t[::1] grp = groups
    cdef Py_ssize_t i, j
    cdef cnp.int64_t g, ex

    for i in range(n):
        g = grp[i]
        if g < 0 or g >= n_groups:
            raise ValueError("selection_counts: group label out of range")
        for j in range(k):
            ex = sel[i, j]
            if ex < 0 or ex >= n_experts:
                raise ValueError("selection_counts: expert index out of range")
            counts[g, ex] += 1.0

    return counts_arr
