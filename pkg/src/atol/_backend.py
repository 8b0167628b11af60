"""Kernel backend selection.

The compiled extension is used when importable; setting ``ATOL_PURE_PYTHON=1``
in the environment forces the numpy fallback. Library code looks the backend
up at call time through :func:`kernels`, so :func:`use_backend` can switch it
for benchmarks and parity tests.
"""
import contextlib
import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None

_FORCE_PYTHON = os.environ.get("ATOL_PURE_PYTHON", "") not in ("", "0")
_active = _pykernels if (_compiled is None or _FORCE_PYTHON) else _compiled


def kernels():
    return _active


def backend_name():
    return "compiled" if _active is _compiled else "python"


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def use_backend(name):
    global _active
    previous = _active
    _active = get_backend(name)
    try:
        yield _active
    finally:
        _active = previous
