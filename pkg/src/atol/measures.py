"""Finite weighted point measures and their long-format CSV files.

A persistence diagram is the ``dim == 2`` case with unit weights.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np


class MeasureFormatError(ValueError):
    """Raised for unparseable or inconsistent measure files."""


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Weighted atoms ``sum_k weights[k] * delta(points[k])`` in R^dim."""

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights=None, dim=None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, dim if dim is not None else 0)
        if pts.ndim != 2:
            raise ValueError("points must be a (k, d) array")
        if dim is not None and pts.shape[1] != dim:
            raise ValueError(f"points have dimension {pts.shape[1]}, expected {dim}")
        if pts.shape[1] < 1:
            raise ValueError("dimension must be positive")
        w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (len(pts),):
            raise ValueError("weights and points differ in length")
        if np.any(~(w >= 0)) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def diagram(cls, pairs, dim=2):
        """Unit-weight measure from a list of (birth, death) pairs."""
        return cls(np.asarray(pairs, dtype=np.float64).reshape(-1, dim), None, dim=dim)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @property
    def mass(self):
        return float(self.weights.sum())

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def scaled(self, alpha):
        return PointMeasure(self.points, alpha * self.weights)

    def superpose(self, other):
        """Measure sum ``self + other``."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return PointMeasure(np.vstack([self.points, other.points]),
                            np.concatenate([self.weights, other.weights]))

    def merged(self):
        """Collapse duplicate atoms by summing their weights (sorted by coordinates)."""
        if len(self) == 0:
            return self
        uniq, inverse = np.unique(self.points, axis=0, return_inverse=True)
        w = np.bincount(inverse.ravel(), weights=self.weights, minlength=len(uniq))
        return PointMeasure(uniq, w)

    def check_bounds(self, radius=None, max_mass=None):
        """Raise ValueError unless the atoms lie in B(0, radius) and mass <= max_mass."""
        if radius is not None and len(self):
            norms = np.linalg.norm(self.points, axis=1)
            if norms.max() > radius:
                raise ValueError(f"atom of norm {norms.max():g} outside ball of radius {radius:g}")
        if max_mass is not None and self.mass > max_mass:
            raise ValueError(f"mass {self.mass:g} exceeds bound {max_mass:g}")


def integrate(m: PointMeasure, f: Callable[[np.ndarray], float]) -> float:
    """Exact integral ``sum_k w_k f(x_k)`` of ``f`` against ``m``."""
    total = 0.0
    for x, w in zip(m.points, m.weights):
        total += w * f(x)
    return float(total)


@dataclass(frozen=True, eq=False)
class MeasureCollection:
    """An ordered list of same-dimension measures with optional labels."""

    measures: tuple
    labels: tuple | None = None
    dim: int | None = field(default=None)

    def __init__(self, measures: Iterable[PointMeasure], labels: Sequence | None = None, dim=None):
        measures = tuple(measures)
        dims = {m.dim for m in measures}
        if len(dims) > 1:
            raise ValueError(f"measures have mixed dimensions {sorted(dims)}")
        if dims:
            (d,) = dims
            if dim is not None and dim != d:
                raise ValueError(f"measures have dimension {d}, expected {dim}")
            dim = d
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(measures):
                raise ValueError("labels and measures differ in length")
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dim", dim)

    def __len__(self):
        return len(self.measures)

    def __getitem__(self, i):
        return self.measures[i]

    def __iter__(self):
        return iter(self.measures)

    def __eq__(self, other):
        if not isinstance(other, MeasureCollection):
            return NotImplemented
        return (self.dim == other.dim and self.labels == other.labels
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.measures, other.measures)))

    __hash__ = None

    def subset(self, indices):
        idx = [int(i) for i in indices]
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        return MeasureCollection([self.measures[i] for i in idx], labels, dim=self.dim)

    def unlabeled(self):
        return MeasureCollection(self.measures, None, dim=self.dim)

    @property
    def masses(self):
        return np.array([m.mass for m in self.measures])

    @cached_property
    def flat(self):
        """(points, weights, offsets): all atoms stacked, measure i at offsets[i]:offsets[i+1]."""
        d = self.dim or 1
        sizes = [len(m) for m in self.measures]
        offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        if self.measures:
            points = np.ascontiguousarray(np.vstack([m.points for m in self.measures]).reshape(-1, d))
            weights = np.ascontiguousarray(np.concatenate([m.weights for m in self.measures]))
        else:
            points, weights = np.empty((0, d)), np.empty(0)
        for a in (points, weights, offsets):
            a.setflags(write=False)
        return points, weights, offsets


def empirical_mean_support(c: MeasureCollection) -> PointMeasure:
    """The empirical mean measure (1/n) sum_i X_i as one atomic measure."""
    if len(c) == 0:
        raise ValueError("empty collection")
    points, weights, _ = c.flat
    return PointMeasure(points, weights / len(c), dim=c.dim)


# ---------------------------------------------------------------------------
# files


def _fmt(x):
    return repr(float(x))


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_measures(c: MeasureCollection) -> str:
    d = c.dim or 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["measure_id", "weight"] + [f"x{k + 1}" for k in range(d)])
    for i, m in enumerate(c.measures):
        for x, wt in zip(m.points, m.weights):
            w.writerow([i, _fmt(wt)] + [_fmt(v) for v in x])
    return buf.getvalue()


def dumps_labels(c: MeasureCollection) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["measure_id", "label"])
    for i, lab in enumerate(c.labels or ()):
        w.writerow([i, lab])
    return buf.getvalue()


def save_measures(c: MeasureCollection, path, labels_path=None, format="csv"):
    """Write the long-format CSV (and the labels sidecar when asked)."""
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    atomic_write(path, dumps_measures(c))
    if labels_path is not None:
        if c.labels is None:
            raise ValueError("collection has no labels")
        atomic_write(labels_path, dumps_labels(c))


def _parse_label(s):
    try:
        return int(s)
    except ValueError:
        return s


def read_labels(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != ["measure_id", "label"]:
            raise MeasureFormatError(f"{path}: line 1: expected header 'measure_id,label'")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MeasureFormatError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                mid = int(row[0])
            except ValueError:
                raise MeasureFormatError(f"{path}: line {lineno}: bad measure_id {row[0]!r}") from None
            if mid < 0:
                raise MeasureFormatError(f"{path}: line {lineno}: negative measure_id")
            out[mid] = _parse_label(row[1].strip())
    return out


def loads_measures(text, source="<string>", labels=None) -> MeasureCollection:
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None:
        raise MeasureFormatError(f"{source}: line 1: missing header")
    header = [h.strip() for h in header]
    d = len(header) - 2
    if d < 1 or header[:2] != ["measure_id", "weight"] or header[2:] != [f"x{k + 1}" for k in range(d)]:
        raise MeasureFormatError(f"{source}: line 1: expected header 'measure_id,weight,x1,...,xd'")
    groups: dict[int, tuple[list, list]] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise MeasureFormatError(
                f"{source}: line {lineno}: inconsistent dimension, expected {d + 2} fields, got {len(row)}")
        try:
            mid = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise MeasureFormatError(f"{source}: line {lineno}: malformed row {','.join(row)!r}") from None
        if mid < 0:
            raise MeasureFormatError(f"{source}: line {lineno}: negative measure_id")
        if not (vals[0] >= 0 and np.isfinite(vals[0])):
            raise MeasureFormatError(f"{source}: line {lineno}: weight must be finite and nonnegative")
        pts, wts = groups.setdefault(mid, ([], []))
        pts.append(vals[1:])
        wts.append(vals[0])
    ids = set(groups)
    if labels is not None:
        ids |= set(labels)
    measures = []
    for mid in sorted(ids):
        pts, wts = groups.get(mid, ([], []))
        measures.append(PointMeasure(np.array(pts, dtype=np.float64).reshape(-1, d), wts, dim=d))
    lab = None
    if labels is not None:
        missing = sorted(ids - set(labels))
        if missing:
            raise MeasureFormatError(f"{source}: no label for measure_id {missing[0]}")
        lab = [labels[mid] for mid in sorted(ids)]
    return MeasureCollection(measures, lab, dim=d)


def load_measures(path, labels_path=None, format="csv") -> MeasureCollection:
    """Read a long-format CSV; measure ids (ascending) fix the collection order.

    When a labels sidecar is given, ids that only appear there become empty
    measures, which is how empty measures survive a round trip.
    """
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    labels = read_labels(labels_path) if labels_path is not None else None
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return loads_measures(text, source=os.fspath(path), labels=labels)
