"""Contrast-function featurisation of measures from a fitted codebook.

Each center ``c_i`` with bandwidth ``s_i`` defines a contrast function, and a
measure is mapped to the vector of its integrals against all of them::

    laplacian: x -> exp(-|x - c_i| / s_i)
    gaussian:  x -> exp(-|x - c_i|^2 / s_i^2)

Adaptive bandwidths are half the distance from each center to its nearest
neighbour in the codebook.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _backend
from .measures import MeasureCollection, PointMeasure, atomic_write
from .quantize import Codebook, QuantizerConfig, fit


class ContrastFamily(str, enum.Enum):
    LAPLACIAN = "laplacian"
    GAUSSIAN = "gaussian"

    @property
    def code(self):
        return 0 if self is ContrastFamily.LAPLACIAN else 1


def _family(f):
    try:
        return ContrastFamily(f)
    except ValueError:
        raise ValueError(f"unknown contrast family {f!r}") from None


def pairwise_distances(centers):
    c = np.asarray(centers, dtype=np.float64)
    diff = c[:, None, :] - c[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def compute_sigmas(centers) -> np.ndarray:
    """Half the distance from each center to its nearest other center."""
    c = np.asarray(centers, dtype=np.float64)
    if len(c) < 2:
        raise ValueError("adaptive bandwidth undefined for b=1")
    dist = pairwise_distances(c)
    np.fill_diagonal(dist, np.inf)
    nearest = dist.min(axis=1)
    if np.any(nearest == 0):
        raise ValueError("duplicate centers: adaptive bandwidth undefined")
    return nearest / 2


def mean_center_distance(centers) -> float:
    """Average distance over distinct pairs of centers."""
    c = np.asarray(centers, dtype=np.float64)
    if len(c) < 2:
        raise ValueError("need at least two centers")
    iu = np.triu_indices(len(c), k=1)
    return float(pairwise_distances(c)[iu].mean())


@dataclass(frozen=True, eq=False)
class VectorizationMap:
    """A frozen codebook with bandwidths and a contrast family: measures -> R^b."""

    codebook: Codebook
    family: ContrastFamily = ContrastFamily.LAPLACIAN

    def __post_init__(self):
        family = _family(self.family)
        sig = self.codebook.sigmas
        if sig is None:
            raise ValueError("codebook has no bandwidths")
        if not np.all(sig > 0) or not np.all(np.isfinite(sig)):
            raise ValueError("bandwidths must be positive and finite")
        object.__setattr__(self, "family", family)
        if self.codebook.family != family.value:
            object.__setattr__(self, "codebook", replace(self.codebook, family=family.value))

    @classmethod
    def from_centers(cls, centers, family=ContrastFamily.LAPLACIAN, bandwidth=None):
        """Build a map with adaptive bandwidths, or a constant one when given."""
        centers = np.asarray(centers, dtype=np.float64)
        if bandwidth is None:
            sigmas = compute_sigmas(centers)
        else:
            if not bandwidth > 0:
                raise ValueError("bandwidth must be positive")
            sigmas = np.full(len(centers), float(bandwidth))
        return cls(Codebook(centers, sigmas), family)

    @property
    def centers(self):
        return self.codebook.centers

    @property
    def sigmas(self):
        return self.codebook.sigmas

    @property
    def size(self):
        return self.codebook.size

    @property
    def dim(self):
        return self.codebook.dim

    def __eq__(self, other):
        if not isinstance(other, VectorizationMap):
            return NotImplemented
        return self.family == other.family and self.codebook == other.codebook

    __hash__ = None

    def contrast(self, i, x) -> float:
        dist = math.sqrt(float(np.sum((np.asarray(x, dtype=np.float64) - self.centers[i]) ** 2)))
        s = float(self.sigmas[i])
        if self.family is ContrastFamily.LAPLACIAN:
            return math.exp(-dist / s)
        return math.exp(-(dist * dist) / (s * s))

    def _run(self, points, weights, offsets):
        if points.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: measure has {points.shape[1]}, map has {self.dim}")
        return _backend.kernels().contrast_transform(
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(offsets, dtype=np.int64),
            np.ascontiguousarray(self.centers),
            np.ascontiguousarray(self.sigmas),
            self.family.code,
        )

    def transform(self, m: PointMeasure) -> np.ndarray:
        if m.dim != self.dim:
            raise ValueError(f"dimension mismatch: measure has {m.dim}, map has {self.dim}")
        offsets = np.array([0, len(m)], dtype=np.int64)
        return self._run(m.points, m.weights, offsets)[0]

    def transform_batch(self, c) -> np.ndarray:
        if not isinstance(c, MeasureCollection):
            c = MeasureCollection(c)
        if len(c) == 0:
            return np.zeros((0, self.size))
        points, weights, offsets = c.flat
        return self._run(points, weights, offsets)

    __call__ = transform_batch

    def with_bandwidth(self, bandwidth):
        """Same centers and family, every bandwidth set to ``bandwidth``."""
        return VectorizationMap.from_centers(self.centers, self.family, bandwidth)

    def to_dict(self):
        return self.codebook.to_dict()

    @classmethod
    def from_dict(cls, data):
        cb = Codebook.from_dict(data)
        if cb.family is None:
            raise ValueError("map JSON needs a 'family'")
        return cls(cb, cb.family)

    def save(self, path):
        atomic_write(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(Codebook.load(path).to_dict())


def calibration_subset(n, fraction, seed):
    """Sorted indices of ceil(fraction * n) measures drawn without replacement."""
    if not 0 < fraction <= 1:
        raise ValueError("calibration_fraction must be in (0, 1]")
    k = max(1, math.ceil(fraction * n - 1e-9))
    k = min(k, n)
    if k == n:
        return np.arange(n)
    rng = np.random.default_rng([seed, 0xCA1])
    return np.sort(rng.choice(n, size=k, replace=False))


def calibrate(measures, cfg: QuantizerConfig, family=ContrastFamily.LAPLACIAN,
              calibration_fraction=1.0, bandwidth=None) -> VectorizationMap:
    """Fit a vectorization map without supervision.

    Labels are dropped before anything else happens. A seeded subset of whole
    measures (``ceil(fraction * n)`` of them) is quantized, then bandwidths are
    set adaptively, or to ``bandwidth`` when one is given (required for b=1).
    """
    if isinstance(measures, MeasureCollection):
        coll = measures.unlabeled()
    else:
        coll = MeasureCollection(measures)
    if len(coll) == 0:
        raise ValueError("empty collection")
    if cfg.budget == 1 and bandwidth is None:
        raise ValueError("adaptive bandwidth undefined for b=1; pass a constant bandwidth")
    sub = coll.subset(calibration_subset(len(coll), calibration_fraction, cfg.seed))
    codebook = fit(sub, cfg)
    return VectorizationMap.from_centers(codebook.centers, _family(family), bandwidth)


def split_budget(total, n_channels) -> list[int]:
    """Equal split; any remainder goes one apiece to the earliest channels."""
    if n_channels < 1:
        raise ValueError("need at least one channel")
    if total < n_channels:
        raise ValueError("budget smaller than channel count")
    base, extra = divmod(total, n_channels)
    return [base + (1 if i < extra else 0) for i in range(n_channels)]


@dataclass(frozen=True)
class MultiChannelMap:
    """One map per measure channel (e.g. per diagram type); outputs concatenate."""

    channels: tuple

    def __init__(self, channels: Sequence[VectorizationMap]):
        channels = tuple(channels)
        if not channels:
            raise ValueError("need at least one channel")
        object.__setattr__(self, "channels", channels)

    @property
    def budgets(self):
        return [ch.size for ch in self.channels]

    @property
    def size(self):
        return sum(self.budgets)

    def transform(self, measures: Sequence[PointMeasure]) -> np.ndarray:
        return transform_multi(self, measures)


def transform_multi(mm: MultiChannelMap, channels: Sequence[PointMeasure]) -> np.ndarray:
    if len(channels) != len(mm.channels):
        raise ValueError(f"expected {len(mm.channels)} channels, got {len(channels)}")
    return np.concatenate([vm.transform(m) for vm, m in zip(mm.channels, channels)])


def calibrate_multi(collections: Sequence[MeasureCollection], cfg: QuantizerConfig,
                    family=ContrastFamily.LAPLACIAN, calibration_fraction=1.0):
    """Calibrate one map per channel, splitting ``cfg.budget`` across channels."""
    budgets = split_budget(cfg.budget, len(collections))
    maps = [
        calibrate(coll, replace(cfg, budget=b, seed=cfg.seed + i), family, calibration_fraction)
        for i, (coll, b) in enumerate(zip(collections, budgets))
    ]
    return MultiChannelMap(maps)
