"""End-to-end classification experiments: measures -> features -> forest.

One repetition draws a stratified train/test split, calibrates the
vectorization map on a fraction of the *training* measures only (labels are
never passed to calibration), vectorizes every measure, fits a forest on the
training rows and scores the test rows.

Datasets are first put in a canonical order keyed on measure content, so
results do not depend on the order in which measures were supplied.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from . import _backend
from .forest import ForestConfig
from .forest import fit as fit_forest
from .measures import MeasureCollection, PointMeasure, load_measures
from .orbits import OrbitDatasetSpec, generate_dataset
from .quantize import BATCH_LLOYD, MINIBATCH_MACQUEEN, Codebook, QuantizerConfig
from .vectorize import (ContrastFamily, VectorizationMap, calibrate, calibration_subset,
                        compute_sigmas, mean_center_distance)

SWEEP_EXPONENTS = (-2, -1.5, -1, -0.5, -0.2, -0.1, 0, 0.1, 0.2, 0.5, 1, 1.5, 2)
MINIBATCH_THRESHOLD = 1000  # calibration sets at least this large use MacQueen in "auto" mode

PRESETS = {
    # the full synthetic benchmark: 5 classes x 1000 orbits x 1000 iterations
    "orbit5k-table3": dict(orbit=OrbitDatasetSpec()),
    # 5 classes x 200 orbits x 300 iterations; minutes, not hours
    "orbit-desk": dict(orbit=OrbitDatasetSpec(orbits_per_class=200, n_iterations=300)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    orbit: OrbitDatasetSpec | None = None
    measures_path: str | None = None
    labels_path: str | None = None
    budget: int = 100
    family: str = "laplacian"
    calibration_fraction: float = 0.10
    split_ratio: float = 0.70
    n_repetitions: int = 10
    quantizer_mode: str = "auto"
    max_iterations: int = 300
    relative_tolerance: float = 1e-9
    minibatch_size: int = 1024
    bandwidth: float | None = None
    baseline: str = "atol"
    grid_domain: tuple = ((0.0, 1.0), (0.0, 1.0))
    forest: ForestConfig = field(default_factory=ForestConfig)
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must be in (0, 1)")
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        if not 0 < self.calibration_fraction <= 1:
            raise ValueError("calibration_fraction must be in (0, 1]")
        if self.quantizer_mode not in ("auto", BATCH_LLOYD, MINIBATCH_MACQUEEN):
            raise ValueError(f"unknown quantizer mode {self.quantizer_mode!r}")
        if self.baseline not in ("atol", "grid"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        ContrastFamily(self.family)
        if self.orbit is None and self.measures_path is None:
            raise ValueError("config needs a dataset: an orbit spec or a measures file")

    @classmethod
    def preset(cls, name, **overrides):
        try:
            base = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(**{**base, **overrides})

    def to_dict(self):
        d = asdict(self)
        d["grid_domain"] = [list(r) for r in self.grid_domain]
        if self.orbit is not None:
            d["orbit"]["parameters"] = list(self.orbit.parameters)
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if data.get("orbit") is not None:
            data["orbit"] = OrbitDatasetSpec(**data["orbit"])
        if "forest" in data:
            data["forest"] = ForestConfig(**data["forest"])
        if "grid_domain" in data:
            data["grid_domain"] = tuple(tuple(float(v) for v in r) for r in data["grid_domain"])
        return cls(**data)


def host_descriptor():
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kernels": _backend.backend_name(),
    }


def _summary(values):
    a = np.asarray(values, dtype=np.float64)
    std = float(a.std(ddof=1)) if len(a) > 1 else 0.0
    return float(a.mean()), std


@dataclass
class ExperimentReport:
    accuracies: list
    vectorization_times: list
    config: dict
    host: dict = field(default_factory=host_descriptor)

    @property
    def mean(self):
        return _summary(self.accuracies)[0]

    @property
    def std(self):
        return _summary(self.accuracies)[1]

    @property
    def mean_time(self):
        return float(np.mean(self.vectorization_times))

    def to_dict(self):
        return {
            "mean_accuracy": self.mean,
            "std_accuracy": self.std,
            "accuracies": list(self.accuracies),
            "mean_vectorization_time_s": self.mean_time,
            "vectorization_times_s": list(self.vectorization_times),
            "config": self.config,
            "host": self.host,
        }

    def summary_line(self):
        return f"{100 * self.mean:5.1f} ± {100 * self.std:3.1f}  ({self.mean_time:.2f} s)"


# ---------------------------------------------------------------------------
# datasets and splits


@lru_cache(maxsize=4)
def _orbit_dataset(spec):
    return generate_dataset(spec)


def content_key(m: PointMeasure) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(m.points).tobytes())
    h.update(np.ascontiguousarray(m.weights).tobytes())
    return h.digest()


def canonical_order(c: MeasureCollection) -> np.ndarray:
    """Permutation sorting measures by (content hash, label)."""
    labels = c.labels if c.labels is not None else [None] * len(c)
    keys = [(content_key(m), str(lab)) for m, lab in zip(c.measures, labels)]
    return np.array(sorted(range(len(c)), key=keys.__getitem__), dtype=np.int64)


def load_dataset(cfg: ExperimentConfig) -> MeasureCollection:
    if cfg.orbit is not None:
        data = _orbit_dataset(cfg.orbit)
    else:
        data = load_measures(cfg.measures_path, cfg.labels_path)
    if data.labels is None:
        raise ValueError("experiments need labelled measures (pass a labels file)")
    return data


def stratified_split(labels, ratio, seed):
    """Per class, a seeded ``round(ratio * n_c)`` of the members go to train."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        k = int(round(ratio * len(members)))
        if len(members) >= 2:
            k = min(max(k, 1), len(members) - 1)
        train.append(rng.permutation(members)[:k])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(len(labels)), train)
    return train, test


def _rep_seeds(master_seed, rep):
    split, quant, forest = np.random.SeedSequence([master_seed, rep]).generate_state(3, np.uint64)
    return int(split), int(quant) >> 1, int(forest) >> 1


# ---------------------------------------------------------------------------
# codebooks


def grid_codebook(b, domain=((0.0, 1.0), (0.0, 1.0))) -> Codebook:
    """floor(sqrt(b))^2 centers at the cell midpoints of a regular grid on a 2-D box."""
    if len(domain) != 2:
        raise ValueError("grid codebook is defined for d=2")
    if b < 4:
        raise ValueError("grid codebook needs b >= 4")
    g = math.isqrt(b)
    (x0, x1), (y0, y1) = domain
    xs = x0 + (np.arange(g) + 0.5) * ((x1 - x0) / g)
    ys = y0 + (np.arange(g) + 0.5) * ((y1 - y0) / g)
    centers = np.array([(x, y) for x in xs for y in ys])
    return Codebook(centers, compute_sigmas(centers))


def _quantizer_config(cfg, n_calibration, seed):
    mode = cfg.quantizer_mode
    if mode == "auto":
        mode = MINIBATCH_MACQUEEN if n_calibration >= MINIBATCH_THRESHOLD else BATCH_LLOYD
    return QuantizerConfig(budget=cfg.budget, seed=seed, max_iterations=cfg.max_iterations,
                           relative_tolerance=cfg.relative_tolerance, mode=mode,
                           minibatch_size=cfg.minibatch_size)


def build_map(cfg: ExperimentConfig, train: MeasureCollection, seed) -> VectorizationMap:
    """The vectorization map for one repetition; sees training measures, never labels."""
    if cfg.baseline == "grid":
        cb = grid_codebook(cfg.budget, cfg.grid_domain)
        return VectorizationMap.from_centers(cb.centers, cfg.family, cfg.bandwidth)
    n_cal = len(calibration_subset(len(train), cfg.calibration_fraction, seed))
    qcfg = _quantizer_config(cfg, n_cal, seed)
    return calibrate(train.unlabeled(), qcfg, cfg.family, cfg.calibration_fraction, cfg.bandwidth)


# ---------------------------------------------------------------------------
# experiments


def _prepare(cfg, dataset):
    data = load_dataset(cfg) if dataset is None else dataset
    if data.labels is None:
        raise ValueError("experiments need labelled measures")
    data = data.subset(canonical_order(data))
    return data, np.asarray(data.labels)


def _run_repetition(cfg, data, labels, rep, record):
    split_seed, quant_seed, forest_seed = _rep_seeds(cfg.master_seed, rep)
    train, test = stratified_split(labels, cfg.split_ratio, split_seed)
    train_coll = data.subset(train)
    t0 = time.perf_counter()
    vmap = build_map(cfg, train_coll, quant_seed)
    features = vmap.transform_batch(data)
    elapsed = time.perf_counter() - t0
    model = fit_forest(features[train], labels[train], replace(cfg.forest, seed=forest_seed))
    acc = model.accuracy(features[test], labels[test])
    if record is not None:
        cal = calibration_subset(len(train), cfg.calibration_fraction, quant_seed)
        record.append({"repetition": rep, "train": train, "test": test,
                       "calibration": train[cal] if cfg.baseline == "atol" else np.empty(0, int),
                       "map": vmap})
    return acc, elapsed


def _map_reps(cfg, fn):
    reps = range(cfg.n_repetitions)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, reps))
    return [fn(r) for r in reps]


def run_experiment(cfg: ExperimentConfig, dataset: MeasureCollection | None = None,
                   record: list | None = None) -> ExperimentReport:
    """Mean/std test accuracy over ``cfg.n_repetitions`` seeded splits.

    ``record``, when given, receives per-repetition index sets (train, test,
    calibration) in the canonical dataset order, for hygiene checks.
    """
    data, labels = _prepare(cfg, dataset)

    def one(rep):
        try:
            return _run_repetition(cfg, data, labels, rep, record)
        except Exception as exc:
            raise RuntimeError(f"repetition {rep} failed: {exc}") from exc

    results = _map_reps(cfg, one)
    if record is not None:
        record.sort(key=lambda r: r["repetition"])
    return ExperimentReport([a for a, _ in results], [t for _, t in results], cfg.to_dict())


# ---------------------------------------------------------------------------
# ablation


ABLATION_COLUMNS = ("b=4", "b=16", "b=36", "b=100", "gaussian", "laplacian", "10%", "100%")


@dataclass
class AblationTable:
    cells: dict  # (baseline, column) -> ExperimentReport

    def report(self, baseline, column):
        return self.cells[(baseline, column)]

    def to_dict(self):
        out = {}
        for (baseline, col), rep in self.cells.items():
            out.setdefault(baseline, {})[col] = rep.to_dict()
        return out

    def format(self):
        cols = list(dict.fromkeys(c for _, c in self.cells))
        rows = list(dict.fromkeys(b for b, _ in self.cells))
        width = 24
        lines = ["".ljust(8) + "".join(c.ljust(width) for c in cols)]
        for b in rows:
            cells = [self.cells[(b, c)].summary_line() if (b, c) in self.cells else "-" for c in cols]
            lines.append(b.ljust(8) + "".join(s.ljust(width) for s in cells))
        return "\n".join(lines)


def run_ablation(base: ExperimentConfig, budgets=(4, 16, 36, 100), families=("gaussian", "laplacian"),
                 fractions=(0.10, 1.0), baselines=("atol", "grid"), dataset=None) -> AblationTable:
    """Vary one parameter at a time around ``base``; identical cells run once."""
    data = load_dataset(base) if dataset is None else dataset
    cache = {}

    def run(cfg):
        key = json.dumps(cfg.to_dict(), sort_keys=True)
        if key not in cache:
            cache[key] = run_experiment(cfg, data)
        return cache[key]

    cells = {}
    for baseline in baselines:
        cfg0 = replace(base, baseline=baseline)
        for b in budgets:
            cells[(baseline, f"b={b}")] = run(replace(cfg0, budget=b))
        for fam in families:
            cells[(baseline, fam)] = run(replace(cfg0, family=fam))
        for frac in fractions:
            # a fixed grid has nothing to calibrate, so its fraction cells coincide
            cfg = cfg0 if baseline == "grid" else replace(cfg0, calibration_fraction=frac)
            cells[(baseline, f"{round(100 * frac)}%")] = run(cfg)
    return AblationTable(cells)


# ---------------------------------------------------------------------------
# bandwidth sweep


@dataclass
class SweepReport:
    exponents: list
    constant: list  # one accuracy list per exponent
    adaptive: list
    mean_center_distances: list
    config: dict
    host: dict = field(default_factory=host_descriptor)

    def constant_summary(self):
        return [_summary(a) for a in self.constant]

    def adaptive_summary(self):
        return _summary(self.adaptive)

    def to_dict(self):
        return {
            "adaptive": {"mean_accuracy": self.adaptive_summary()[0],
                         "std_accuracy": self.adaptive_summary()[1],
                         "accuracies": list(self.adaptive)},
            "constant": [
                {"exponent": e, "multiplier": 10.0 ** e, "mean_accuracy": m, "std_accuracy": s,
                 "accuracies": list(a)}
                for e, a, (m, s) in zip(self.exponents, self.constant, self.constant_summary())
            ],
            "mean_center_distances": list(self.mean_center_distances),
            "config": self.config,
            "host": self.host,
        }

    def format(self):
        m, s = self.adaptive_summary()
        lines = [f"adaptive            {100 * m:5.1f} ± {100 * s:3.1f}"]
        for e, (mm, ss) in zip(self.exponents, self.constant_summary()):
            lines.append(f"mu x 10^{e:<+5.1f}      {100 * mm:5.1f} ± {100 * ss:3.1f}")
        return "\n".join(lines)


def run_bandwidth_sweep(cfg: ExperimentConfig, exponents=SWEEP_EXPONENTS, dataset=None) -> SweepReport:
    """Constant bandwidths mu * 10^e against the adaptive ones, on shared codebooks.

    ``mu`` is the mean pairwise distance between the centers calibrated in
    each repetition; every bandwidth setting reuses that repetition's split,
    codebook and forest seed.
    """
    data, labels = _prepare(cfg, dataset)
    base = replace(cfg, bandwidth=None)

    def one(rep):
        split_seed, quant_seed, forest_seed = _rep_seeds(base.master_seed, rep)
        train, test = stratified_split(labels, base.split_ratio, split_seed)
        vmap = build_map(base, data.subset(train), quant_seed)
        fcfg = replace(base.forest, seed=forest_seed)

        def score(m):
            feats = m.transform_batch(data)
            return fit_forest(feats[train], labels[train], fcfg).accuracy(feats[test], labels[test])

        mu = mean_center_distance(vmap.centers)
        return score(vmap), [score(vmap.with_bandwidth(mu * 10.0 ** e)) for e in exponents], mu

    results = _map_reps(base, one)
    constant = [[r[1][k] for r in results] for k in range(len(exponents))]
    return SweepReport(list(exponents), constant, [r[0] for r in results], [r[2] for r in results],
                       base.to_dict())


# ---------------------------------------------------------------------------
# separation probe


@dataclass
class SeparationResult:
    max_intra: float
    min_inter: float
    budget: int

    @property
    def separated(self):
        return self.min_inter > self.max_intra

    def to_dict(self):
        return {"max_intra_gap": self.max_intra, "min_inter_gap": self.min_inter,
                "budget": self.budget, "separated": self.separated}


DEFAULT_SOURCES = (((0.2, 0.2), (0.8, 0.2)), ((0.2, 0.2), (0.2, 0.8)))


def _ball_noise(rng, shape, radius):
    n, d = shape
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * (radius * rng.random((n, 1)) ** (1.0 / d))


def noisy_copies(sources, n_per_source, noise, seed):
    """``n_per_source`` copies of each source, every atom moved uniformly within radius ``noise``."""
    rng = np.random.default_rng(seed)
    measures, labels = [], []
    for s, atoms in enumerate(sources):
        atoms = np.asarray(atoms, dtype=np.float64)
        for _ in range(n_per_source):
            pts = atoms + (_ball_noise(rng, atoms.shape, noise) if noise > 0 else 0.0)
            measures.append(PointMeasure(pts))
            labels.append(s)
    return MeasureCollection(measures, labels)


def gap_statistics(features, labels):
    """(max same-source, min cross-source) sup-norm distance between feature rows."""
    labels = np.asarray(labels)
    diff = np.abs(features[:, None, :] - features[None, :, :]).max(axis=-1)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(labels), dtype=bool)
    intra = diff[same & off]
    inter = diff[~same]
    return (float(intra.max()) if intra.size else 0.0,
            float(inter.min()) if inter.size else float("inf"))


def separation_probe(sources=DEFAULT_SOURCES, n_per_source=50, noise=0.01, budget=None, seed=0,
                     family="laplacian", n_init=10) -> SeparationResult:
    """Calibrate on pooled noisy copies of the sources and compare feature gaps.

    ``budget`` defaults to the number of distinct atoms across all sources.
    """
    data = noisy_copies(sources, n_per_source, noise, seed)
    if budget is None:
        budget = len(np.unique(np.vstack([np.asarray(s, dtype=np.float64) for s in sources]), axis=0))
    qcfg = QuantizerConfig(budget=budget, seed=seed, n_init=n_init)
    vmap = calibrate(data.unlabeled(), qcfg, family)
    intra, inter = gap_statistics(vmap.transform_batch(data), data.labels)
    return SeparationResult(intra, inter, budget)
