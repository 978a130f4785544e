"""Pure-NumPy twin of the compiled kernel extension.

Every function here mirrors one in ``_compiled.pyx``; the package picks a
backend once at import time (see ``smilepc.kernels``).  All inputs to the
distance kernels must already be sorted ascending.
"""

import numpy as np


def wd_sorted(a, b):
    """Area between the ECDFs of two ascending-sorted 1-D samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    pooled = np.sort(np.concatenate([a, b]))
    deltas = np.diff(pooled)
    cdf_a = np.searchsorted(a, pooled[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, pooled[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def ks_sorted(a, b):
    """Supremum distance between the ECDFs of two ascending-sorted samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ad_sorted(a, b):
    """Two-sample rank statistic over the pooled order, first-sample-first on ties.

    Computes (1/(n*m)) * sum_{j=1}^{N-1} (M_j*N - n*j)^2 / (j*(N-j)) where
    M_j counts elements of ``a`` among the j smallest pooled values.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    total = n + m
    values = np.concatenate([a, b])
    labels = np.concatenate([np.zeros(n, dtype=np.int64), np.ones(m, dtype=np.int64)])
    order = np.lexsort((labels, values))  # value ascending, a before b on ties
    is_a = (labels[order] == 0).astype(np.int64)
    m_j = np.cumsum(is_a)[:-1].astype(np.float64)
    j = np.arange(1, total, dtype=np.float64)
    num = (m_j * total - n * j) ** 2
    return float(np.sum(num / (j * (total - j))) / (n * m))


def fps_indices(points, k, start):
    """Farthest point sampling: greedy max-min-distance index selection."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not 0 <= start < n:
        raise ValueError(f"start index out of range: {start}")
    out = np.empty(k, dtype=np.int64)
    out[0] = start
    diff = pts - pts[start]
    dist = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, k):
        nxt = int(np.argmax(dist))  # first max on ties
        out[i] = nxt
        diff = pts - pts[nxt]
        np.minimum(dist, np.einsum("ij,ij->i", diff, diff), out=dist)
    return out


def assign_clusters(points, centroids):
    """Nearest-centroid labels (first centroid wins ties) and total SSE."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    cen = np.ascontiguousarray(centroids, dtype=np.float64)
    d2 = ((pts[:, None, :] - cen[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    sse = float(d2[np.arange(pts.shape[0]), labels].sum())
    return labels, sse


def solve_spd(a, b):
    """Solve a @ x = b for symmetric positive definite a via Cholesky.

    Hand-rolled so results do not depend on BLAS threading.  Raises
    ``np.linalg.LinAlgError`` if a pivot is non-positive.
    """
    a = np.array(a, dtype=np.float64)
    x = np.array(b, dtype=np.float64)
    m = a.shape[0]
    if a.shape != (m, m) or x.shape != (m,):
        raise ValueError("shape mismatch")
    # lower Cholesky factor written into a
    for j in range(m):
        s = a[j, j] - float(np.dot(a[j, :j], a[j, :j]))
        if s <= 0.0:
            raise np.linalg.LinAlgError("matrix is not positive definite")
        a[j, j] = np.sqrt(s)
        if j + 1 < m:
            a[j + 1 :, j] = (a[j + 1 :, j] - a[j + 1 :, :j] @ a[j, :j]) / a[j, j]
    # forward substitution L y = b
    for i in range(m):
        x[i] = (x[i] - float(np.dot(a[i, :i], x[:i]))) / a[i, i]
    # back substitution L^T x = y
    for i in range(m - 1, -1, -1):
        x[i] = (x[i] - float(np.dot(a[i + 1 :, i], x[i + 1 :]))) / a[i, i]
    return x
