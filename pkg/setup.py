"""Build the optional compiled kernels.

The extension is optional: when Cython or a C compiler is missing the
package installs without it and ``atol._backend`` falls back to the
numpy kernels.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("ATOL_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        # no fp contraction: keeps compiled results identical to the numpy path
        extra = ["-O3", "-ffp-contract=off"] if sys.platform != "win32" else ["/O2", "/fp:precise"]
        ext_modules = cythonize(
            [Extension("atol._kernels", ["src/atol/_kernels.pyx"], extra_compile_args=extra)],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
