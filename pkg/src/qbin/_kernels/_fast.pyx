# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pure``; same signatures and results."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport malloc, calloc, free

cnp.import_array()


def scan_match(cnp.ndarray tags_arr, cnp.ndarray tokens_arr):
    """Indices of ``tags`` present in the sorted array ``tokens`` (binary search per row)."""
    cdef const uint64_t[::1] tags = np.ascontiguousarray(tags_arr, dtype=np.uint64)
    cdef const uint64_t[::1] toks = np.ascontiguousarray(tokens_arr, dtype=np.uint64)
    cdef Py_ssize_t n = tags.shape[0], t = toks.shape[0]
    cdef Py_ssize_t i, lo, hi, mid, cnt = 0
    cdef uint64_t g
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    if t == 0:
        return out[:0]
    with nogil:
        for i in range(n):
            g = tags[i]
            lo = 0
            hi = t
            while lo < hi:
                mid = (lo + hi) >> 1
                if toks[mid] < g:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < t and toks[lo] == g:
                o[cnt] = i
                cnt += 1
    return out[:cnt]


cdef struct State:
    int m
    int n
    int nrb
    int nvb
    int weighted
    int ref_primary
    unsigned char *allowed   # m x (n+1)
    int *rb
    int *vb
    int *rsz
    int *vsz
    int *cell                # nrb x nvb
    int *r_used
    int *v_used
    int *sigma
    int *taken
    int *lim
    int64_t *fact
    int64_t *counts          # m x n
    int64_t *joint_e         # m x m
    int64_t *joint_v         # n x n
    int64_t total


cdef int64_t _lambda_count(int *lim, int cnt, int nsec) nogil:
    # insertion sort, cnt is tiny
    cdef int i, j, tmp
    cdef int64_t total = 1, f
    for i in range(1, cnt):
        tmp = lim[i]
        j = i - 1
        while j >= 0 and lim[j] > tmp:
            lim[j + 1] = lim[j]
            j -= 1
        lim[j + 1] = tmp
    for i in range(cnt):
        f = (lim[i] if lim[i] < nsec else nsec) - i
        if f <= 0:
            return 0
        total *= f
    return total


cdef int64_t _weight(State *s) nogil:
    cdef int a, b, best
    cdef int64_t w = 1
    if not s.weighted:
        return 1
    for a in range(s.nrb):
        w *= s.fact[s.rsz[a] - s.r_used[a]]
    for b in range(s.nvb):
        w *= s.fact[s.vsz[b] - s.v_used[b]]
    if s.ref_primary:
        for b in range(s.nvb):
            best = s.nvb
            for a in range(s.nrb):
                if s.cell[a * s.nvb + b] and s.rsz[a] < best:
                    best = s.rsz[a]
            s.lim[b] = best
        w *= _lambda_count(s.lim, s.nvb, s.nvb)
    else:
        for a in range(s.nrb):
            best = s.nrb
            for b in range(s.nvb):
                if s.cell[a * s.nvb + b] and s.vsz[b] < best:
                    best = s.vsz[b]
            s.lim[a] = best
        w *= _lambda_count(s.lim, s.nrb, s.nrb)
    if s.weighted == 2 and w > 1:
        return 1
    return w


cdef void _leaf(State *s) nogil:
    cdef int64_t w = _weight(s)
    cdef int e, f
    if w == 0:
        return
    s.total += w
    for e in range(s.m):
        if s.sigma[e] < 0:
            continue
        s.counts[e * s.n + s.sigma[e]] += w
        for f in range(s.m):
            if s.sigma[f] < 0:
                continue
            s.joint_e[e * s.m + f] += w
            s.joint_v[s.sigma[e] * s.n + s.sigma[f]] += w


cdef void _dfs(State *s, int e, int left) nogil:
    cdef int a, b, v, n1 = s.n + 1
    if left > s.m - e:
        return
    if e == s.m:
        _leaf(s)
        return
    if s.allowed[e * n1 + s.n] and left <= s.m - e - 1:
        _dfs(s, e + 1, left)
    if left == 0:
        return
    a = s.rb[e]
    for v in range(s.n):
        if s.taken[v] or not s.allowed[e * n1 + v]:
            continue
        b = s.vb[v]
        if s.weighted and s.cell[a * s.nvb + b]:
            continue
        s.taken[v] = 1
        s.sigma[e] = v
        s.cell[a * s.nvb + b] += 1
        s.r_used[a] += 1
        s.v_used[b] += 1
        _dfs(s, e + 1, left - 1)
        s.cell[a * s.nvb + b] -= 1
        s.r_used[a] -= 1
        s.v_used[b] -= 1
        s.sigma[e] = -1
        s.taken[v] = 0


def enumerate_assignments(allowed, int k, int weighted, ref_bin, val_bin, ref_primary,
                          ref_bin_size, val_bin_size):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, mode="c"] al = np.ascontiguousarray(allowed, dtype=np.uint8)
    cdef cnp.ndarray[int, ndim=1, mode="c"] rb = np.ascontiguousarray(ref_bin, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1, mode="c"] vb = np.ascontiguousarray(val_bin, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1, mode="c"] rsz = np.ascontiguousarray(ref_bin_size, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1, mode="c"] vsz = np.ascontiguousarray(val_bin_size, dtype=np.intc)
    cdef int m = al.shape[0], n = al.shape[1] - 1
    cdef int nrb = rsz.shape[0], nvb = vsz.shape[0], i
    counts = np.zeros((m, n), dtype=np.int64)
    joint_e = np.zeros((m, m), dtype=np.int64)
    joint_v = np.zeros((n, n), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] c_counts = counts
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] c_je = joint_e
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] c_jv = joint_v
    cdef int64_t fact[32]
    cdef State s
    fact[0] = 1
    for i in range(1, 32):
        fact[i] = fact[i - 1] * i
    s.m = m
    s.n = n
    s.nrb = nrb
    s.nvb = nvb
    s.weighted = weighted
    s.ref_primary = 1 if ref_primary else 0
    s.allowed = <unsigned char *> al.data
    s.rb = <int *> rb.data
    s.vb = <int *> vb.data
    s.rsz = <int *> rsz.data
    s.vsz = <int *> vsz.data
    s.fact = fact
    s.counts = <int64_t *> c_counts.data
    s.joint_e = <int64_t *> c_je.data
    s.joint_v = <int64_t *> c_jv.data
    s.total = 0
    s.cell = <int *> calloc(max(nrb * nvb, 1), sizeof(int))
    s.r_used = <int *> calloc(max(nrb, 1), sizeof(int))
    s.v_used = <int *> calloc(max(nvb, 1), sizeof(int))
    s.sigma = <int *> malloc(max(m, 1) * sizeof(int))
    s.taken = <int *> calloc(max(n, 1), sizeof(int))
    s.lim = <int *> malloc(max(nrb + nvb, 1) * sizeof(int))
    try:
        for i in range(m):
            s.sigma[i] = -1
        with nogil:
            _dfs(&s, 0, k)
    finally:
        free(s.cell)
        free(s.r_used)
        free(s.v_used)
        free(s.sigma)
        free(s.taken)
        free(s.lim)
    return counts, int(s.total), joint_e, joint_v
