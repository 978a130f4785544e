# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels: ECDF distances over sorted samples, farthest
point sampling, nearest-centroid assignment, and a small SPD solver.

API mirror of ``smilepc.kernels._pure``.
"""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def wd_sorted(const double[::1] a, const double[::1] b):
    """Area between the ECDFs of two ascending-sorted 1-D samples."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double acc = 0.0, prev = 0.0, v
    cdef bint started = False
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    while i < n or j < m:
        if i < n and (j >= m or a[i] <= b[j]):
            v = a[i]
        else:
            v = b[j]
        if started:
            acc += fabs(<double>i / n - <double>j / m) * (v - prev)
        while i < n and a[i] == v:
            i += 1
        while j < m and b[j] == v:
            j += 1
        prev = v
        started = True
    return acc


def ks_sorted(const double[::1] a, const double[::1] b):
    """Supremum distance between the ECDFs of two ascending-sorted samples."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double best = 0.0, d, v
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    while i < n or j < m:
        if i < n and (j >= m or a[i] <= b[j]):
            v = a[i]
        else:
            v = b[j]
        while i < n and a[i] == v:
            i += 1
        while j < m and b[j] == v:
            j += 1
        d = fabs(<double>i / n - <double>j / m)
        if d > best:
            best = d
    return best


def ad_sorted(const double[::1] a, const double[::1] b):
    """Two-sample rank statistic over the pooled order, a-first on ties."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t N = n + m
    cdef Py_ssize_t i = 0, j = 0, t, M = 0
    cdef double acc = 0.0, term
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    for t in range(1, N + 1):
        if i < n and (j >= m or a[i] <= b[j]):
            i += 1
            M += 1
        else:
            j += 1
        if t < N:
            term = (<double>M) * N - (<double>n) * t
            acc += term * term / ((<double>t) * (N - t))
    return acc / ((<double>n) * m)


def fps_indices(const double[:, ::1] points, Py_ssize_t k, Py_ssize_t start):
    """Farthest point sampling: greedy max-min-distance index selection."""
    cdef Py_ssize_t n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not 0 <= start < n:
        raise ValueError(f"start index out of range: {start}")
    out = np.empty(k, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = out
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t i, p, best, cur
    cdef double dx, dy, dz, d2, bestval
    idx[0] = start
    cur = start
    for p in range(n):
        dx = points[p, 0] - points[cur, 0]
        dy = points[p, 1] - points[cur, 1]
        dz = points[p, 2] - points[cur, 2]
        dist[p] = dx * dx + dy * dy + dz * dz
    for i in range(1, k):
        best = 0
        bestval = dist[0]
        for p in range(1, n):
            if dist[p] > bestval:
                bestval = dist[p]
                best = p
        idx[i] = best
        cur = best
        for p in range(n):
            dx = points[p, 0] - points[cur, 0]
            dy = points[p, 1] - points[cur, 1]
            dz = points[p, 2] - points[cur, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < dist[p]:
                dist[p] = d2
    return out


def assign_clusters(const double[:, ::1] points, const double[:, ::1] centroids):
    """Nearest-centroid labels (first centroid wins ties) and total SSE."""
    cdef Py_ssize_t n = points.shape[0], c = centroids.shape[0]
    if c < 1:
        raise ValueError("need at least one centroid")
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = out
    cdef Py_ssize_t p, q, best
    cdef double dx, dy, dz, d2, bestval, sse = 0.0
    for p in range(n):
        best = 0
        bestval = 0.0
        for q in range(c):
            dx = points[p, 0] - centroids[q, 0]
            dy = points[p, 1] - centroids[q, 1]
            dz = points[p, 2] - centroids[q, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if q == 0 or d2 < bestval:
                bestval = d2
                best = q
        labels[p] = best
        sse += bestval
    return out, sse


def solve_spd(const double[:, ::1] a_in, const double[::1] b_in):
    """Solve a @ x = b for symmetric positive definite a via Cholesky."""
    cdef Py_ssize_t m = a_in.shape[0]
    if a_in.shape[1] != m or b_in.shape[0] != m:
        raise ValueError("shape mismatch")
    a_arr = np.array(a_in, dtype=np.float64)
    x_arr = np.array(b_in, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[::1] x = x_arr
    cdef Py_ssize_t i, j, p
    cdef double s
    for j in range(m):
        s = a[j, j]
        for p in range(j):
            s -= a[j, p] * a[j, p]
        if s <= 0.0:
            raise np.linalg.LinAlgError("matrix is not positive definite")
        a[j, j] = sqrt(s)
        for i in range(j + 1, m):
            s = a[i, j]
            for p in range(j):
                s -= a[i, p] * a[j, p]
            a[i, j] = s / a[j, j]
    for i in range(m):
        s = x[i]
        for p in range(i):
            s -= a[i, p] * x[p]
        x[i] = s / a[i, i]
    for i in range(m - 1, -1, -1):
        s = x[i]
        for p in range(i + 1, m):
            s -= a[p, i] * x[p]
        x[i] = s / a[i, i]
    return x_arr
