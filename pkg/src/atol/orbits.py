"""Synthetic orbits of the linked twist map on the unit torus.

    x_{n+1} = x_n + r * y_n * (1 - y_n)          mod 1
    y_{n+1} = y_n + r * x_{n+1} * (1 - x_{n+1})  mod 1

Each orbit is a point cloud in [0, 1)^2 treated as a unit-weight measure,
labelled by the index of its parameter r.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .measures import MeasureCollection, PointMeasure, atomic_write

DEFAULT_PARAMETERS = (2.5, 3.5, 4.0, 4.1, 4.3)
RNG_ALGORITHM = ("numpy PCG64; per-orbit seed = SeedSequence(entropy=[master_seed, float64 bits of r "
                 "(hi, lo 32-bit words), orbit index within its class]).generate_state(1, uint64); "
                 "(x0, y0) = Generator(PCG64(seed)).random(2)")


@dataclass(frozen=True)
class OrbitSpec:
    r: float
    n_iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")


@dataclass(frozen=True)
class OrbitDatasetSpec:
    parameters: tuple = DEFAULT_PARAMETERS
    orbits_per_class: int = 1000
    n_iterations: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        params = tuple(float(r) for r in self.parameters)
        if not params:
            raise ValueError("parameters must be non-empty")
        if len(set(params)) != len(params):
            raise ValueError("parameters must be distinct")
        if any(not r > 0 for r in params):
            raise ValueError("parameters must be positive")
        if self.orbits_per_class < 1 or self.n_iterations < 1:
            raise ValueError("orbits_per_class and n_iterations must be >= 1")
        object.__setattr__(self, "parameters", params)


def iterate(x0, y0, r, n_iterations) -> np.ndarray:
    """The n_iterations points of the orbit starting at (x0, y0), initial point first."""
    out = _backend.kernels().orbits(np.array([x0], dtype=np.float64), np.array([y0], dtype=np.float64),
                                    np.array([r], dtype=np.float64), int(n_iterations))
    return out[0]


def initial_point(seed):
    return np.random.Generator(np.random.PCG64(seed)).random(2)


def generate_orbit(spec: OrbitSpec) -> PointMeasure:
    x0, y0 = initial_point(spec.seed)
    return PointMeasure(iterate(x0, y0, spec.r, spec.n_iterations))


def orbit_seed(master_seed, r, index) -> int:
    """Seed for orbit ``index`` of parameter ``r``; depends on content, not position."""
    hi, lo = struct.unpack(">II", struct.pack(">d", float(r)))
    ss = np.random.SeedSequence([int(master_seed), hi, lo, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_dataset(spec: OrbitDatasetSpec) -> MeasureCollection:
    """``orbits_per_class`` orbits for each parameter, labelled by parameter index."""
    n = spec.orbits_per_class
    rs, x0, y0, labels = [], [], [], []
    for label, r in enumerate(spec.parameters):
        for j in range(n):
            x, y = initial_point(orbit_seed(spec.master_seed, r, j))
            x0.append(x)
            y0.append(y)
            rs.append(r)
            labels.append(label)
    clouds = _backend.kernels().orbits(np.array(x0), np.array(y0), np.array(rs), spec.n_iterations)
    return MeasureCollection([PointMeasure(c) for c in clouds], labels, dim=2)


def manifest(spec: OrbitDatasetSpec, **extra):
    return {"generator": "linked twist map orbits", "spec": asdict(spec),
            "rng": RNG_ALGORITHM, **extra}


def write_manifest(spec: OrbitDatasetSpec, path, **extra):
    atomic_write(path, json.dumps(manifest(spec, **extra), indent=2) + "\n")
