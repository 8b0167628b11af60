# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a numpy twin in ``_pykernels`` with the same
signature and the same floating-point operation order. Keep them in sync.
"""
import numpy as np

from libc.math cimport exp, floor, sqrt, INFINITY
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc, qsort
from libc.string cimport memcpy, memset


cdef inline Py_ssize_t _nearest_ptr(const double* x, const double* c, Py_ssize_t b, Py_ssize_t d,
                                    double* best_out) noexcept nogil:
    cdef Py_ssize_t j, k, bj = 0
    cdef double acc, t, u, best = INFINITY
    if d == 2:
        for j in range(b):
            t = x[0] - c[2 * j]
            u = x[1] - c[2 * j + 1]
            acc = t * t
            acc = acc + u * u
            # strict < keeps the smallest index on ties
            if acc < best:
                best = acc
                bj = j
    else:
        for j in range(b):
            acc = 0.0
            for k in range(d):
                t = x[k] - c[j * d + k]
                acc += t * t
            if acc < best:
                best = acc
                bj = j
    best_out[0] = best
    return bj


cdef inline Py_ssize_t _nearest(const double[:, ::1] points, Py_ssize_t i,
                                const double[:, ::1] centers, double* best_out) noexcept nogil:
    if centers.shape[0] == 0:
        best_out[0] = INFINITY
        return 0
    return _nearest_ptr(&points[i, 0], &centers[0, 0], centers.shape[0], centers.shape[1], best_out)


def assign(const double[:, ::1] points, const double[:, ::1] centers):
    """Nearest-center labels and squared distances."""
    cdef Py_ssize_t n = points.shape[0], i
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] lab = labels
    cdef double[::1] sq = sqdist
    cdef double best
    with nogil:
        for i in range(n):
            lab[i] = _nearest(points, i, centers, &best)
            sq[i] = best
    return labels, sqdist


def lloyd_step(const double[:, ::1] points, const double[::1] weights,
               const double[:, ::1] centers):
    """Assign every point, then accumulate weighted sums and masses per cell."""
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], b = centers.shape[0]
    cdef Py_ssize_t i, j, k
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    sums = np.zeros((b, d), dtype=np.float64)
    mass = np.zeros(b, dtype=np.float64)
    cdef int64_t[::1] lab = labels
    cdef double[::1] sq = sqdist
    cdef double[:, ::1] s = sums
    cdef double[::1] m = mass
    cdef double best, w
    with nogil:
        for i in range(n):
            j = _nearest(points, i, centers, &best)
            lab[i] = j
            sq[i] = best
        for k in range(d):
            for i in range(n):
                s[lab[i], k] += weights[i] * points[i, k]
        for i in range(n):
            m[lab[i]] += weights[i]
    return labels, sqdist, sums, mass


def macqueen_pass(const double[:, ::1] points, const double[::1] weights,
                  double[:, ::1] centers, double[::1] counts, Py_ssize_t batch_size):
    """One streaming pass; updates ``centers`` and ``counts`` in place.

    Within a minibatch, assignments use the centers frozen at the start of
    the batch; updates are then applied point by point.
    """
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1]
    cdef Py_ssize_t s, e, i, j, k
    cdef double best, w, eta
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    cdef int64_t* lab = <int64_t*>malloc(batch_size * sizeof(int64_t))
    if lab == NULL:
        raise MemoryError()
    try:
        with nogil:
            s = 0
            while s < n:
                e = s + batch_size
                if e > n:
                    e = n
                for i in range(s, e):
                    lab[i - s] = _nearest(points, i, centers, &best)
                for i in range(s, e):
                    w = weights[i]
                    if w <= 0.0:
                        continue
                    j = lab[i - s]
                    if counts[j] == 0.0:
                        for k in range(d):
                            centers[j, k] = points[i, k]
                    else:
                        eta = w / (counts[j] + w)
                        for k in range(d):
                            centers[j, k] = centers[j, k] + eta * (points[i, k] - centers[j, k])
                    counts[j] = counts[j] + w
                s = e
    finally:
        free(lab)


def orbits(const double[::1] x0, const double[::1] y0, const double[::1] r,
           Py_ssize_t n_iterations):
    """Iterate the linked twist map for each (x0, y0, r) row."""
    cdef Py_ssize_t m = x0.shape[0], i, t
    out = np.empty((m, n_iterations, 2), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef double x, y, rr
    with nogil:
        for i in range(m):
            x = x0[i]
            y = y0[i]
            rr = r[i]
            o[i, 0, 0] = x
            o[i, 0, 1] = y
            for t in range(1, n_iterations):
                x = x + rr * y * (1.0 - y)
                x = x - floor(x)
                y = y + rr * x * (1.0 - x)
                y = y - floor(y)
                o[i, t, 0] = x
                o[i, t, 1] = y
    return out


def contrast_transform(const double[:, ::1] points, const double[::1] weights,
                       const int64_t[::1] offsets, const double[:, ::1] centers,
                       const double[::1] sigmas, int family):
    """Integrate every contrast function against every measure.

    family 0 is Laplacian exp(-|x-c|/s), family 1 is Gaussian exp(-|x-c|^2/s^2).
    """
    cdef Py_ssize_t n = offsets.shape[0] - 1, b = centers.shape[0], d = centers.shape[1]
    cdef Py_ssize_t mi, i, j, k
    out = np.zeros((n, b), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double acc, t, w, v, s
    with nogil:
        for mi in range(n):
            for i in range(offsets[mi], offsets[mi + 1]):
                w = weights[i]
                for j in range(b):
                    acc = 0.0
                    for k in range(d):
                        t = points[i, k] - centers[j, k]
                        acc += t * t
                    s = sigmas[j]
                    if family == 0:
                        v = exp(-sqrt(acc) / s)
                    else:
                        v = exp(-acc / (s * s))
                    o[mi, j] += w * v
    return out


# ---------------------------------------------------------------------------
# CART trees


cdef struct SortItem:
    double v
    int64_t i


cdef int _cmp_items(const void* a, const void* b) noexcept nogil:
    cdef double va = (<SortItem*>a).v
    cdef double vb = (<SortItem*>b).v
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


cdef inline uint64_t _splitmix(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def build_tree(const double[:, ::1] X, const int64_t[::1] y, const int64_t[::1] sample,
               int n_classes, int max_features, int min_samples_split, int max_depth,
               uint64_t seed):
    """Grow one Gini tree on the rows listed in ``sample`` (repeats allowed).

    Returns (feature, threshold, left, right, counts); leaves have feature -1.
    Nodes are expanded depth first, left child before right, and the feature
    draw order comes from a splitmix64 stream so the numpy twin can replay it.
    """
    cdef Py_ssize_t n = sample.shape[0], p = X.shape[1], K = n_classes
    cdef Py_ssize_t cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, K), dtype=np.int64)
    cdef int64_t[::1] feat_v = feature
    cdef double[::1] thr_v = threshold
    cdef int64_t[::1] left_v = left
    cdef int64_t[::1] right_v = right
    cdef int64_t[:, ::1] cnt_v = counts

    cdef int64_t* idx = <int64_t*>malloc(max(n, 1) * sizeof(int64_t))
    cdef SortItem* items = <SortItem*>malloc(max(n, 1) * sizeof(SortItem))
    cdef int64_t* feats = <int64_t*>malloc(max(p, 1) * sizeof(int64_t))
    cdef int64_t* cl = <int64_t*>malloc(max(K, 1) * sizeof(int64_t))
    cdef int64_t* cr = <int64_t*>malloc(max(K, 1) * sizeof(int64_t))
    cdef int64_t* stack = <int64_t*>malloc(4 * cap * sizeof(int64_t))
    if idx == NULL or items == NULL or feats == NULL or cl == NULL or cr == NULL or stack == NULL:
        free(idx); free(items); free(feats); free(cl); free(cr); free(stack)
        raise MemoryError()

    cdef uint64_t state = seed
    cdef Py_ssize_t n_nodes = 1, top = 0
    cdef int64_t node, start, end, depth, n_node, c, t, nonzero
    cdef int64_t f, jj, f_remaining, visited, pos, best_f, best_pos
    cdef int64_t sl, sr
    cdef double proxy, best_proxy, best_thr, a, bv, mid
    try:
        with nogil:
            for t in range(n):
                idx[t] = sample[t]
            stack[0] = 0; stack[1] = 0; stack[2] = n; stack[3] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack[4 * top]
                start = stack[4 * top + 1]
                end = stack[4 * top + 2]
                depth = stack[4 * top + 3]
                n_node = end - start
                for c in range(K):
                    cnt_v[node, c] = 0
                for t in range(start, end):
                    cnt_v[node, y[idx[t]]] += 1
                nonzero = 0
                for c in range(K):
                    if cnt_v[node, c] > 0:
                        nonzero += 1
                if n_node < min_samples_split or nonzero <= 1:
                    continue
                if max_depth >= 0 and depth >= max_depth:
                    continue

                for f in range(p):
                    feats[f] = f
                f_remaining = p
                visited = 0
                best_f = -1
                best_pos = 0
                best_proxy = -1.0
                best_thr = 0.0
                while f_remaining > 0 and visited < max_features:
                    jj = <int64_t>(_splitmix(&state) % <uint64_t>f_remaining)
                    f = feats[jj]
                    feats[jj] = feats[f_remaining - 1]
                    feats[f_remaining - 1] = f
                    f_remaining -= 1
                    for t in range(n_node):
                        items[t].i = idx[start + t]
                        items[t].v = X[items[t].i, f]
                    qsort(items, n_node, sizeof(SortItem), _cmp_items)
                    if not (items[0].v < items[n_node - 1].v):
                        continue
                    visited += 1
                    sl = 0
                    sr = 0
                    for c in range(K):
                        cl[c] = 0
                        cr[c] = cnt_v[node, c]
                        sr += cr[c] * cr[c]
                    for pos in range(1, n_node):
                        c = y[items[pos - 1].i]
                        sl += 2 * cl[c] + 1
                        cl[c] += 1
                        sr -= 2 * cr[c] - 1
                        cr[c] -= 1
                        if items[pos - 1].v < items[pos].v:
                            proxy = (<double>sl) / (<double>pos) + (<double>sr) / (<double>(n_node - pos))
                            if proxy > best_proxy:
                                best_proxy = proxy
                                best_f = f
                                best_pos = pos
                                a = items[pos - 1].v
                                bv = items[pos].v
                                mid = (a + bv) / 2.0
                                if mid >= bv:
                                    mid = a
                                best_thr = mid
                if best_f < 0:
                    continue

                for t in range(n_node):
                    items[t].i = idx[start + t]
                    items[t].v = X[items[t].i, best_f]
                qsort(items, n_node, sizeof(SortItem), _cmp_items)
                for t in range(n_node):
                    idx[start + t] = items[t].i
                feat_v[node] = best_f
                thr_v[node] = best_thr
                left_v[node] = n_nodes
                right_v[node] = n_nodes + 1
                # right pushed first so the left subtree is expanded first
                stack[4 * top] = n_nodes + 1
                stack[4 * top + 1] = start + best_pos
                stack[4 * top + 2] = end
                stack[4 * top + 3] = depth + 1
                top += 1
                stack[4 * top] = n_nodes
                stack[4 * top + 1] = start
                stack[4 * top + 2] = start + best_pos
                stack[4 * top + 3] = depth + 1
                top += 1
                n_nodes += 2
    finally:
        free(idx); free(items); free(feats); free(cl); free(cr); free(stack)

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


def apply_tree(const double[:, ::1] X, const int64_t[::1] feature, const double[::1] threshold,
               const int64_t[::1] left, const int64_t[::1] right):
    """Leaf index reached by each row."""
    cdef Py_ssize_t n = X.shape[0], i
    cdef int64_t node
    leaves = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = leaves
    with nogil:
        for i in range(n):
            node = 0
            while left[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return leaves
