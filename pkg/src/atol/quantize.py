"""Quantization of the empirical mean measure onto a b-point codebook.

Two fitters are provided: batch Lloyd iteration on the mean measure and a
single-pass minibatch MacQueen stream. Both start from ``b`` distinct atoms
of the mean measure drawn weight-proportionally without replacement.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .measures import MeasureCollection, atomic_write

BATCH_LLOYD = "batch_lloyd"
MINIBATCH_MACQUEEN = "minibatch_macqueen"


@dataclass(frozen=True, eq=False)
class Codebook:
    """Centers (b, d) plus optional per-center bandwidths and contrast family."""

    centers: np.ndarray
    sigmas: np.ndarray | None = None
    family: str | None = None

    def __post_init__(self):
        c = np.array(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("centers must be a non-empty (b, d) array")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if self.sigmas is not None:
            s = np.array(self.sigmas, dtype=np.float64).reshape(-1)
            if s.shape != (c.shape[0],):
                raise ValueError("need one sigma per center")
            s.setflags(write=False)
            object.__setattr__(self, "sigmas", s)

    @property
    def size(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented
        same_sigmas = (self.sigmas is None and other.sigmas is None) or (
            self.sigmas is not None and other.sigmas is not None
            and np.array_equal(self.sigmas, other.sigmas))
        return (np.array_equal(self.centers, other.centers) and same_sigmas
                and self.family == other.family)

    __hash__ = None

    def to_dict(self):
        return {
            "dim": self.dim,
            "centers": self.centers.tolist(),
            "sigmas": None if self.sigmas is None else self.sigmas.tolist(),
            "family": self.family,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            centers = np.asarray(data["centers"], dtype=np.float64)
            dim = int(data["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid codebook JSON: {exc}") from None
        if centers.ndim != 2 or centers.shape[1] != dim:
            raise ValueError("codebook JSON: centers do not match 'dim'")
        family = data.get("family")
        if family not in (None, "laplacian", "gaussian"):
            raise ValueError(f"codebook JSON: unknown family {family!r}")
        return cls(centers, data.get("sigmas"), family)

    def save(self, path):
        atomic_write(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass(frozen=True)
class QuantizerConfig:
    budget: int
    seed: int = 0
    max_iterations: int = 300
    relative_tolerance: float = 1e-9
    mode: str = BATCH_LLOYD
    minibatch_size: int = 1024
    n_init: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.relative_tolerance < 0:
            raise ValueError("relative_tolerance must be >= 0")
        if self.mode not in (BATCH_LLOYD, MINIBATCH_MACQUEEN):
            raise ValueError(f"unknown quantizer mode {self.mode!r}")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")


def voronoi_assign(x, centers) -> int:
    """Index of the Voronoi cell containing ``x``; ties go to the smallest index."""
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    best, best_j = np.inf, 0
    for j, c in enumerate(centers):
        dist = float(np.sum((x - c) ** 2))
        if dist < best:
            best, best_j = dist, j
    return best_j


def _mean_measure(c: MeasureCollection):
    if len(c) == 0:
        raise ValueError("empty collection")
    points, weights, _ = c.flat
    return np.ascontiguousarray(points), weights / len(c)


def _support(points, weights):
    """Distinct atoms carrying positive mass, with merged weights."""
    keep = weights > 0
    pts, w = points[keep], weights[keep]
    if len(pts) == 0:
        return pts, w
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=w, minlength=len(uniq))
    return np.ascontiguousarray(uniq), merged


def _initial_centers(support, support_w, b, rng):
    if len(support) < b:
        raise ValueError("budget exceeds support")
    pick = rng.choice(len(support), size=b, replace=False, p=support_w / support_w.sum())
    return support[pick].copy()


def _reseed(centers, cells, support, support_w):
    """Move each center listed in ``cells`` onto the support atom farthest from its center."""
    _, sq = _backend.kernels().assign(support, centers)
    order = np.argsort(-(support_w * sq), kind="stable")
    taken = 0
    for j in cells:
        while taken < len(order) and sq[order[taken]] == 0.0:
            taken += 1
        if taken >= len(order):
            break
        centers[j] = support[order[taken]]
        sq[order[taken]] = 0.0
        taken += 1
    return centers


def _repair_duplicates(centers, support, support_w):
    _, first = np.unique(centers, axis=0, return_index=True)
    dup = sorted(set(range(len(centers))) - set(first.tolist()))
    if dup:
        centers = _reseed(centers, dup, support, support_w)
    return centers


def lloyd(points, weights, init, max_iterations=300, relative_tolerance=1e-9):
    """Lloyd iteration on the atomic measure (points, weights) from ``init``.

    Returns the final centers and the distortion of each visited codebook.
    Empty cells are reseeded at the atom farthest from its center.
    """
    k = _backend.kernels()
    points = np.ascontiguousarray(points, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    c = np.array(init, dtype=np.float64)
    trace = []
    for _ in range(max_iterations):
        _, sq, sums, mass = k.lloyd_step(points, weights, c)
        trace.append(float(np.dot(weights, sq)))
        empty = mass <= 0
        new = np.empty_like(c)
        new[~empty] = sums[~empty] / mass[~empty, None]
        if empty.any():
            new[empty] = c[empty]
            new = _reseed(new, np.flatnonzero(empty), points, weights)
        if np.array_equal(new, c):
            break
        shift = np.max(np.linalg.norm(new - c, axis=1) / (1.0 + np.linalg.norm(c, axis=1)))
        c = new
        if shift <= relative_tolerance:
            break
    return c, trace


def _fit_once(points, weights, offsets, support, support_w, cfg, rng):
    init = _initial_centers(support, support_w, cfg.budget, rng)
    if cfg.mode == BATCH_LLOYD:
        # Lloyd only needs the merged support; it is the same measure
        centers, _ = lloyd(support, support_w, init, cfg.max_iterations, cfg.relative_tolerance)
    else:
        order = rng.permutation(len(offsets) - 1)
        idx = np.concatenate([np.arange(offsets[i], offsets[i + 1]) for i in order])
        stream_p = np.ascontiguousarray(points[idx])
        stream_w = np.ascontiguousarray(weights[idx])
        centers = init
        counts = np.zeros(cfg.budget)
        _backend.kernels().macqueen_pass(stream_p, stream_w, centers, counts, cfg.minibatch_size)
    centers = _repair_duplicates(centers, support, support_w)
    return centers


def fit(c: MeasureCollection, cfg: QuantizerConfig) -> Codebook:
    """Quantize the mean measure of ``c`` with the fitter selected by ``cfg.mode``.

    With ``n_init > 1`` the fit is repeated from independently seeded
    initializations and the lowest-distortion codebook is kept.
    """
    points, weights = _mean_measure(c)
    support, support_w = _support(points, weights)
    if len(support) < cfg.budget:
        raise ValueError("budget exceeds support")
    _, _, offsets = c.flat
    best, best_cost = None, np.inf
    for k in range(cfg.n_init):
        rng = np.random.default_rng(cfg.seed if k == 0 else [cfg.seed, k])
        centers = _fit_once(points, weights, offsets, support, support_w, cfg, rng)
        if cfg.n_init == 1:
            return Codebook(centers)
        _, sq = _backend.kernels().assign(support, centers)
        cost = float(np.dot(support_w, sq))
        if cost < best_cost:
            best, best_cost = centers, cost
    return Codebook(best)


def lloyd_fit(c: MeasureCollection, cfg: QuantizerConfig) -> Codebook:
    return fit(c, replace(cfg, mode=BATCH_LLOYD))


def macqueen_fit(c: MeasureCollection, cfg: QuantizerConfig) -> Codebook:
    return fit(c, replace(cfg, mode=MINIBATCH_MACQUEEN))


def distortion(codebook, c: MeasureCollection) -> float:
    """k-means cost of ``codebook`` against the empirical mean measure of ``c``."""
    centers = codebook.centers if isinstance(codebook, Codebook) else np.asarray(codebook, dtype=np.float64)
    points, weights = _mean_measure(c)
    if points.shape[1] != centers.shape[1]:
        raise ValueError("dimension mismatch")
    _, sq = _backend.kernels().assign(points, np.ascontiguousarray(centers))
    return float(np.dot(weights, sq))
