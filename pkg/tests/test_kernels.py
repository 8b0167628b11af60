"""The compiled kernels and their numpy twins must agree."""
import numpy as np
import pytest

from atol import _backend, _pykernels

pytestmark = pytest.mark.skipif(not _backend.COMPILED_AVAILABLE, reason="compiled backend not built")


@pytest.fixture
def compiled():
    return _backend.get_backend("compiled")


def test_assign_parity(compiled, rng):
    pts, centers = rng.random((500, 3)), rng.random((7, 3))
    for a, b in zip(compiled.assign(pts, centers), _pykernels.assign(pts, centers)):
        np.testing.assert_array_equal(a, b)


def test_lloyd_step_parity(compiled, rng):
    pts, w, centers = rng.random((400, 2)), rng.random(400), rng.random((5, 2))
    for a, b in zip(compiled.lloyd_step(pts, w, centers), _pykernels.lloyd_step(pts, w, centers)):
        np.testing.assert_array_equal(a, b)


def test_macqueen_parity(compiled, rng):
    pts, w = rng.random((300, 2)), rng.random(300)
    c1 = rng.random((4, 2))
    c2 = c1.copy()
    n1, n2 = np.zeros(4), np.zeros(4)
    compiled.macqueen_pass(pts, w, c1, n1, 17)
    _pykernels.macqueen_pass(pts, w, c2, n2, 17)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_array_equal(n1, n2)


def test_orbit_parity(compiled, rng):
    x0, y0 = rng.random(20), rng.random(20)
    r = rng.choice([2.5, 3.5, 4.0, 4.1, 4.3], size=20)
    np.testing.assert_array_equal(compiled.orbits(x0, y0, r, 300), _pykernels.orbits(x0, y0, r, 300))


@pytest.mark.parametrize("family", [0, 1])
def test_contrast_parity(compiled, rng, family):
    pts, w = rng.random((300, 2)), rng.random(300)
    offsets = np.array([0, 100, 100, 300], dtype=np.int64)
    centers, sigmas = rng.random((6, 2)), rng.random(6) + 0.05
    a = compiled.contrast_transform(pts, w, offsets, centers, sigmas, family)
    b = _pykernels.contrast_transform(pts, w, offsets, centers, sigmas, family)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    assert a.shape == (3, 6) and np.all(a[1] == 0)


@pytest.mark.parametrize("max_depth", [-1, 3])
def test_tree_parity(compiled, rng, max_depth):
    X = rng.random((150, 6))
    X[:, 2] = 1.0  # constant column
    y = rng.integers(0, 3, size=150)
    sample = rng.integers(0, 150, size=150)
    a = compiled.build_tree(X, y, sample, 3, 2, 2, max_depth, 12345)
    b = _pykernels.build_tree(X, y, sample, 3, 2, 2, max_depth, 12345)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    np.testing.assert_array_equal(compiled.apply_tree(X, *a[:4]), _pykernels.apply_tree(X, *b[:4]))


def test_use_backend_switches_and_restores():
    before = _backend.backend_name()
    with _backend.use_backend("python"):
        assert _backend.backend_name() == "python"
    assert _backend.backend_name() == before
    with pytest.raises(ValueError):
        _backend.get_backend("fortran")
