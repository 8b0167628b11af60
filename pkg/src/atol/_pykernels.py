"""Pure numpy kernels, used when the compiled extension is unavailable.

Signatures and floating-point operation order mirror ``_kernels.pyx``.
Assignment, accumulation, the orbit recurrence and tree growth reproduce the
compiled results bit for bit; the contrast transform agrees to rounding of
``exp``.
"""
import numpy as np

_CHUNK = 1 << 21  # distance-matrix entries per block
_MASK = (1 << 64) - 1


def _sqdist_block(points, centers):
    acc = np.zeros((points.shape[0], centers.shape[0]))
    for k in range(points.shape[1]):
        t = points[:, k, None] - centers[None, :, k]
        acc += t * t
    return acc


def assign(points, centers):
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sqdist = np.empty(n, dtype=np.float64)
    step = max(1, _CHUNK // max(1, centers.shape[0]))
    for s in range(0, n, step):
        acc = _sqdist_block(points[s:s + step], centers)
        lab = np.argmin(acc, axis=1)
        labels[s:s + step] = lab
        sqdist[s:s + step] = acc[np.arange(acc.shape[0]), lab]
    return labels, sqdist


def lloyd_step(points, weights, centers):
    b, d = centers.shape
    labels, sqdist = assign(points, centers)
    sums = np.empty((b, d))
    for k in range(d):
        sums[:, k] = np.bincount(labels, weights=weights * points[:, k], minlength=b)
    mass = np.bincount(labels, weights=weights, minlength=b).astype(np.float64)
    return labels, sqdist, sums, mass


def macqueen_pass(points, weights, centers, counts, batch_size):
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    n = points.shape[0]
    for s in range(0, n, batch_size):
        block = points[s:s + batch_size]
        labels, _ = assign(block, centers)
        for i, j in enumerate(labels.tolist()):
            w = float(weights[s + i])
            if w <= 0.0:
                continue
            x = block[i]
            if counts[j] == 0.0:
                centers[j] = x
            else:
                eta = w / (counts[j] + w)
                centers[j] = centers[j] + eta * (x - centers[j])
            counts[j] = counts[j] + w


def orbits(x0, y0, r, n_iterations):
    m = x0.shape[0]
    out = np.empty((m, n_iterations, 2))
    x = np.array(x0, dtype=np.float64)
    y = np.array(y0, dtype=np.float64)
    out[:, 0, 0] = x
    out[:, 0, 1] = y
    for t in range(1, n_iterations):
        x = x + r * y * (1.0 - y)
        x = x - np.floor(x)
        y = y + r * x * (1.0 - x)
        y = y - np.floor(y)
        out[:, t, 0] = x
        out[:, t, 1] = y
    return out


def contrast_transform(points, weights, offsets, centers, sigmas, family):
    n = offsets.shape[0] - 1
    b = centers.shape[0]
    out = np.zeros((n, b))
    sizes = np.diff(offsets)
    step = max(1, _CHUNK // max(1, b))
    mi = 0
    while mi < n:
        # group whole measures into blocks of roughly `step` atoms
        mj = mi + 1
        total = sizes[mi]
        while mj < n and total + sizes[mj] <= step:
            total += sizes[mj]
            mj += 1
        lo, hi = offsets[mi], offsets[mj]
        if hi > lo:
            acc = _sqdist_block(points[lo:hi], centers)
            if family == 0:
                vals = np.exp(-np.sqrt(acc) / sigmas)
            else:
                vals = np.exp(-acc / (sigmas * sigmas))
            vals *= weights[lo:hi, None]
            block_sizes = sizes[mi:mj]
            nz = np.flatnonzero(block_sizes)
            starts = (offsets[mi:mj] - lo)[nz]
            out[mi + nz] = np.add.reduceat(vals, starts, axis=0)
        mi = mj
    return out


def _splitmix(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def build_tree(X, y, sample, n_classes, max_features, min_samples_split, max_depth, seed):
    n = sample.shape[0]
    p = X.shape[1]
    K = n_classes
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    state = int(seed) & _MASK
    idx = np.array(sample, dtype=np.int64)
    new_node()
    stack = [(0, 0, n, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        n_node = end - start
        rows = idx[start:end]
        hist = np.bincount(y[rows], minlength=K).astype(np.int64)
        counts[node] = hist
        if n_node < min_samples_split or np.count_nonzero(hist) <= 1:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        feats = list(range(p))
        f_remaining = p
        visited = 0
        best = (-1.0, -1, 0, 0.0)  # proxy, feature, position, threshold
        positions = np.arange(1, n_node)
        while f_remaining > 0 and visited < max_features:
            state, z = _splitmix(state)
            jj = z % f_remaining
            f = feats[jj]
            feats[jj] = feats[f_remaining - 1]
            feats[f_remaining - 1] = f
            f_remaining -= 1
            vals = X[rows, f]
            order = np.argsort(vals, kind="stable")
            v = vals[order]
            if not v[0] < v[-1]:
                continue
            visited += 1
            onehot = np.zeros((n_node, K), dtype=np.int64)
            onehot[np.arange(n_node), y[rows[order]]] = 1
            cl = np.cumsum(onehot, axis=0)[:-1]
            cr = hist[None, :] - cl
            sl = (cl * cl).sum(axis=1)
            sr = (cr * cr).sum(axis=1)
            valid = v[:-1] < v[1:]
            proxy = sl / positions + sr / (n_node - positions)
            proxy = np.where(valid, proxy, -np.inf)
            k = int(np.argmax(proxy))
            if proxy[k] > best[0]:
                a, bv = float(v[k]), float(v[k + 1])
                mid = (a + bv) / 2.0
                if mid >= bv:
                    mid = a
                best = (float(proxy[k]), f, k + 1, mid)
        _, best_f, best_pos, best_thr = best
        if best_f < 0:
            continue

        vals = X[rows, best_f]
        idx[start:end] = rows[np.argsort(vals, kind="stable")]
        lnode = new_node()
        rnode = new_node()
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        stack.append((rnode, start + best_pos, end, depth + 1))
        stack.append((lnode, start, start + best_pos, depth + 1))

    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(len(counts), K),
    )


def apply_tree(X, feature, threshold, left, right):
    nodes = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(left[nodes] >= 0)
    while active.size:
        cur = nodes[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        nodes[active] = np.where(go_left, left[cur], right[cur])
        active = active[left[nodes[active]] >= 0]
    return nodes
