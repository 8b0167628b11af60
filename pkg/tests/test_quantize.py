import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atol.measures import MeasureCollection, PointMeasure
from atol.quantize import (BATCH_LLOYD, MINIBATCH_MACQUEEN, Codebook, QuantizerConfig, distortion,
                           fit, lloyd, lloyd_fit, macqueen_fit, voronoi_assign)

from conftest import random_collection
from oracles import kmeans_cost, naive_nearest, optimal_kmeans_cost


def diracs(*pts):
    return MeasureCollection([PointMeasure([p]) for p in pts])


def line(values, weights=None):
    w = np.ones(len(values)) if weights is None else weights
    return MeasureCollection([PointMeasure(np.array(values, dtype=float)[:, None], w)])


def as_set(centers):
    return sorted(map(tuple, np.round(centers, 12)))


# -- voronoi -----------------------------------------------------------------

def test_tie_goes_to_first_center():
    assert voronoi_assign([1.0, 0.0], [[0.0, 0.0], [2.0, 0.0]]) == 0


def test_strictly_nearer_center():
    assert voronoi_assign([1.5, 0.0], [[0.0, 0.0], [2.0, 0.0]]) == 1


def test_single_center():
    assert voronoi_assign([7.0, -3.0], [[0.0, 0.0]]) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 4))
def test_assign_matches_naive_scan(seed, b, d):
    rng = np.random.default_rng(seed)
    # integer grid coordinates make exact ties common
    centers = rng.integers(-2, 3, size=(b, d)).astype(float)
    x = rng.integers(-2, 3, size=d).astype(float)
    assert voronoi_assign(x, centers) == naive_nearest(x, centers)


def test_kernel_assign_matches_naive(backend, rng):
    from atol import _backend
    centers = rng.integers(-2, 3, size=(5, 2)).astype(float)
    pts = rng.integers(-2, 3, size=(200, 2)).astype(float)
    labels, sq = _backend.kernels().assign(pts, centers)
    assert labels.tolist() == [naive_nearest(p, centers) for p in pts]
    np.testing.assert_array_equal(sq, ((pts - centers[labels]) ** 2).sum(axis=1))


# -- lloyd -------------------------------------------------------------------

def test_two_diracs_fit_exactly(backend):
    c = diracs([0.0, 0.0], [1.0, 0.0])
    cb = lloyd_fit(c, QuantizerConfig(budget=2, seed=0))
    assert as_set(cb.centers) == [(0.0, 0.0), (1.0, 0.0)]
    assert distortion(cb, c) == 0.0
    assert cb.sigmas is None


def test_single_center_is_barycenter(backend, rng):
    c = random_collection(rng, n=4)
    pts, w = c.flat[0], c.flat[1]
    bary = (w[:, None] * pts).sum(axis=0) / w.sum()
    support_pts = np.unique(pts, axis=0)
    _, trace = lloyd(pts, w, support_pts[:1])
    assert len(trace) == 2  # one update, then a fixed point
    cb = lloyd_fit(c, QuantizerConfig(budget=1, seed=3))
    np.testing.assert_allclose(cb.centers[0], bary, rtol=1e-12, atol=1e-12)


def test_one_dimensional_two_clusters(backend):
    # brute force over the 2-partitions of {0, 1, 10, 11}: optimum {0,1} | {10,11}
    pts = np.array([[0.0], [1.0], [10.0], [11.0]])
    assert optimal_kmeans_cost(pts, np.ones(4) / 4, 2) == pytest.approx(0.25)
    for seed in range(10):
        cb = lloyd_fit(line([0, 1, 10, 11]), QuantizerConfig(budget=2, seed=seed))
        assert as_set(cb.centers) == [(0.5,), (10.5,)]


def test_budget_exceeds_support():
    c = MeasureCollection([PointMeasure([[0.0], [0.0], [1.0]])])
    with pytest.raises(ValueError, match="budget exceeds support"):
        lloyd_fit(c, QuantizerConfig(budget=3))
    with pytest.raises(ValueError, match="budget exceeds support"):
        macqueen_fit(c, QuantizerConfig(budget=3))


def test_zero_weight_atoms_are_not_support():
    c = MeasureCollection([PointMeasure([[0.0], [5.0]], [1.0, 0.0])])
    with pytest.raises(ValueError, match="budget exceeds support"):
        lloyd_fit(c, QuantizerConfig(budget=2))


def test_empty_collection():
    with pytest.raises(ValueError, match="empty"):
        lloyd_fit(MeasureCollection([]), QuantizerConfig(budget=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_distortion_trace_is_non_increasing(seed, b):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(40, 2))
    w = rng.random(40)
    init = pts[rng.choice(40, size=b, replace=False)]
    _, trace = lloyd(pts, w, init, max_iterations=100, relative_tolerance=0.0)
    assert all(b2 <= a + 1e-12 * max(1.0, a) for a, b2 in zip(trace, trace[1:]))


def test_empty_cell_is_reseeded():
    pts = np.array([[0.0], [1.0], [10.0]])
    # the third center starts far from everything and owns no atom
    c, _ = lloyd(pts, np.ones(3), np.array([[0.0], [1.0], [100.0]]))
    assert as_set(c) == [(0.0,), (1.0,), (10.0,)]


def test_lloyd_is_deterministic(backend, rng):
    c = random_collection(rng, n=5, max_points=20)
    cfg = QuantizerConfig(budget=4, seed=11)
    assert lloyd_fit(c, cfg) == lloyd_fit(c, cfg)


def test_multistart_matches_enumeration_small_cases(backend):
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = int(rng.integers(3, 7))
        b = int(rng.integers(1, 4))
        pts = rng.normal(size=(m, 2))
        w = rng.random(m) + 0.1
        best = min(kmeans_cost(pts, w, lloyd(pts, w, pts[list(s)])[0])
                   for s in itertools.combinations(range(m), b))
        assert best == pytest.approx(optimal_kmeans_cost(pts, w, b), rel=1e-9, abs=1e-12)


def test_n_init_keeps_the_best(rng):
    c = random_collection(rng, n=4, max_points=10)
    one = QuantizerConfig(budget=3, seed=5)
    many = QuantizerConfig(budget=3, seed=5, n_init=8)
    assert distortion(fit(c, many), c) <= distortion(fit(c, one), c) + 1e-15


# -- macqueen ----------------------------------------------------------------

def test_macqueen_repeated_dirac(backend):
    c = MeasureCollection([PointMeasure([[2.0, 3.0]]) for _ in range(5)])
    cb = macqueen_fit(c, QuantizerConfig(budget=1, seed=0, mode=MINIBATCH_MACQUEEN))
    np.testing.assert_array_equal(cb.centers, [[2.0, 3.0]])


def test_macqueen_far_apart_points_are_kept(backend):
    c = diracs([0.0, 0.0], [100.0, 0.0], [0.0, 100.0])
    cb = macqueen_fit(c, QuantizerConfig(budget=3, seed=1, minibatch_size=2))
    assert as_set(cb.centers) == [(0.0, 0.0), (0.0, 100.0), (100.0, 0.0)]


def test_macqueen_close_to_lloyd_on_1d_example(backend):
    # seed 0 starts from one atom of each cluster; a start inside a single
    # cluster cannot be repaired by one streaming pass
    c = line([0, 1, 10, 11])
    ref = lloyd_fit(c, QuantizerConfig(budget=2, seed=0)).centers
    got = macqueen_fit(c, QuantizerConfig(budget=2, seed=0)).centers
    assert np.allclose(np.sort(got.ravel()), np.sort(ref.ravel()), atol=0.25)


def test_macqueen_is_deterministic(backend, rng):
    c = random_collection(rng, n=6, max_points=30)
    cfg = QuantizerConfig(budget=4, seed=2, mode=MINIBATCH_MACQUEEN, minibatch_size=7)
    assert fit(c, cfg) == fit(c, cfg)


def test_macqueen_weights_act_as_multiplicity(backend):
    a = MeasureCollection([PointMeasure([[0.0], [4.0]], [1.0, 3.0])])
    b = MeasureCollection([PointMeasure([[0.0], [4.0], [4.0], [4.0]])])
    cfg = QuantizerConfig(budget=1, seed=0, minibatch_size=1)
    # weight 3 at one atom vs three unit atoms: same running mean
    assert macqueen_fit(a, cfg).centers[0, 0] == pytest.approx(3.0)
    assert macqueen_fit(b, cfg).centers[0, 0] == pytest.approx(3.0)


# -- distortion ----------------------------------------------------------------

def test_distortion_zero_on_support():
    c = diracs([0.0, 0.0], [1.0, 2.0])
    assert distortion(Codebook([[1.0, 2.0], [0.0, 0.0]]), c) == 0.0


def test_distortion_hand_value():
    c = MeasureCollection([PointMeasure([[0.0], [1.0]], [0.5, 0.5])])
    assert distortion(Codebook([[0.5]]), c) == 0.25


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adding_a_center_never_increases_distortion(seed):
    rng = np.random.default_rng(seed)
    c = random_collection(rng, n=3)
    centers = rng.normal(size=(3, 2))
    extra = np.vstack([centers, rng.normal(size=(1, 2))])
    assert distortion(Codebook(extra), c) <= distortion(Codebook(centers), c)


# -- codebook json -------------------------------------------------------------

def test_codebook_json_round_trip(tmp_path):
    cb = Codebook([[0.1, 0.2], [0.3, 0.4]], [0.5, 0.25], "gaussian")
    cb.save(tmp_path / "cb.json")
    assert Codebook.load(tmp_path / "cb.json") == cb
    data = json.loads((tmp_path / "cb.json").read_text())
    assert set(data) == {"dim", "centers", "sigmas", "family"}
    assert Codebook.from_dict({"dim": 1, "centers": [[1.0]], "sigmas": None, "family": None}).sigmas is None


def test_config_validation():
    with pytest.raises(ValueError):
        QuantizerConfig(budget=0)
    with pytest.raises(ValueError):
        QuantizerConfig(budget=2, max_iterations=0)
    with pytest.raises(ValueError):
        QuantizerConfig(budget=2, mode="kmeans++")
    assert QuantizerConfig(budget=2).mode == BATCH_LLOYD
