"""Independent reference computations used to freeze expected values."""
import itertools

import numpy as np


def optimal_kmeans_cost(points, weights, b):
    """Exact weighted k-means cost by enumerating every labelling into <= b groups."""
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    best = np.inf
    for labels in itertools.product(range(b), repeat=len(points)):
        cost = 0.0
        for g in set(labels):
            idx = [i for i, lab in enumerate(labels) if lab == g]
            w = weights[idx]
            if w.sum() == 0:
                continue
            mu = (w[:, None] * points[idx]).sum(axis=0) / w.sum()
            cost += float((w * ((points[idx] - mu) ** 2).sum(axis=1)).sum())
        best = min(best, cost)
    return best


def naive_nearest(x, centers):
    d = [float(((np.asarray(x) - c) ** 2).sum()) for c in centers]
    return d.index(min(d))


def kmeans_cost(points, weights, centers):
    return sum(w * min(float(((p - c) ** 2).sum()) for c in centers) for p, w in zip(points, weights))
