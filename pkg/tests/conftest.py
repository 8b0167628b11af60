import numpy as np
import pytest

from atol import _backend
from atol.measures import MeasureCollection, PointMeasure

BACKENDS = ["python"] + (["compiled"] if _backend.COMPILED_AVAILABLE else [])

# filled by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _backend.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_collection(rng, n=3, dim=2, max_points=6, labels=False):
    measures = []
    for _ in range(n):
        k = int(rng.integers(1, max_points + 1))
        measures.append(PointMeasure(rng.normal(size=(k, dim)), rng.random(k) * 3))
    lab = [int(v) for v in rng.integers(0, 3, size=n)] if labels else None
    return MeasureCollection(measures, lab)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
