import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atol.orbits import (OrbitDatasetSpec, OrbitSpec, generate_dataset, generate_orbit, iterate,
                         manifest, orbit_seed)


def reference_orbit(x0, y0, r, n):
    # plain-Python recurrence, independent of the kernels
    out = [(x0, y0)]
    x, y = x0, y0
    for _ in range(n - 1):
        x = x + r * y * (1 - y)
        x -= np.floor(x)
        y = y + r * x * (1 - x)
        y -= np.floor(y)
        out.append((x, y))
    return np.array(out)


def test_first_step_hand_values(backend):
    pts = iterate(0.5, 0.5, 3.5, 2)
    assert pts[0].tolist() == [0.5, 0.5]
    assert pts[1, 0] == pytest.approx(0.375, abs=1e-12)
    assert pts[1, 1] == pytest.approx(0.3203125, abs=1e-12)


def test_origin_is_fixed(backend):
    np.testing.assert_array_equal(iterate(0.0, 0.0, 4.3, 50), np.zeros((50, 2)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.sampled_from([2.5, 3.5, 4.0, 4.1, 4.3]))
def test_matches_reference_and_stays_in_unit_square(x0, y0, r):
    pts = iterate(x0, y0, r, 200)
    np.testing.assert_array_equal(pts, reference_orbit(x0, y0, r, 200))
    assert np.all(pts >= 0) and np.all(pts < 1)


def test_generate_orbit_has_unit_weights():
    m = generate_orbit(OrbitSpec(r=4.1, n_iterations=30, seed=5))
    assert len(m) == 30 and m.mass == 30.0
    assert generate_orbit(OrbitSpec(r=4.1, n_iterations=30, seed=5)) == m


def test_spec_validation():
    with pytest.raises(ValueError):
        OrbitSpec(r=0.0)
    with pytest.raises(ValueError):
        OrbitSpec(r=1.0, n_iterations=0)
    with pytest.raises(ValueError, match="distinct"):
        OrbitDatasetSpec(parameters=(2.5, 2.5))
    with pytest.raises(ValueError):
        OrbitDatasetSpec(parameters=())


def test_default_dataset_shape():
    spec = OrbitDatasetSpec()
    assert spec.parameters == (2.5, 3.5, 4.0, 4.1, 4.3)
    data = generate_dataset(spec)
    assert len(data) == 5000
    assert {len(m) for m in data} == {1000}
    assert np.bincount(data.labels).tolist() == [1000] * 5


def test_single_orbit_dataset():
    data = generate_dataset(OrbitDatasetSpec(parameters=(3.5,), orbits_per_class=1, n_iterations=5))
    assert len(data) == 1 and list(data.labels) == [0]


def test_dataset_is_deterministic():
    spec = OrbitDatasetSpec(orbits_per_class=20, n_iterations=50, master_seed=3)
    a, b = generate_dataset(spec), generate_dataset(spec)
    assert all(x == y for x, y in zip(a, b)) and a.labels == b.labels


def test_master_seed_changes_orbits_not_counts():
    a = generate_dataset(OrbitDatasetSpec(orbits_per_class=10, n_iterations=20, master_seed=0))
    b = generate_dataset(OrbitDatasetSpec(orbits_per_class=10, n_iterations=20, master_seed=1))
    assert np.bincount(a.labels).tolist() == np.bincount(b.labels).tolist()
    assert not any(x == y for x, y in zip(a, b))


def test_orbit_reproducible_in_isolation():
    spec = OrbitDatasetSpec(orbits_per_class=8, n_iterations=40, master_seed=11)
    data = generate_dataset(spec)
    k = 2 * 8 + 5  # class 2, orbit 5
    alone = generate_orbit(OrbitSpec(r=4.0, n_iterations=40, seed=orbit_seed(11, 4.0, 5)))
    assert alone == data[k]


def test_parameter_order_only_relabels():
    a = generate_dataset(OrbitDatasetSpec(parameters=(2.5, 4.3), orbits_per_class=4, n_iterations=25))
    b = generate_dataset(OrbitDatasetSpec(parameters=(4.3, 2.5), orbits_per_class=4, n_iterations=25))
    assert all(x == y for x, y in zip(a.measures[:4], b.measures[4:]))


def test_manifest_names_the_rng():
    m = manifest(OrbitDatasetSpec(orbits_per_class=2))
    assert "PCG64" in m["rng"] and m["spec"]["orbits_per_class"] == 2
