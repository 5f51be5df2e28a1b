"""Build script for the optional compiled sampling kernel.

The package is pure Python except for one Cython extension that accelerates
the covariant-measurement sampling loop.  If the extension cannot be built
(no compiler, no Cython) the install still succeeds and the package falls
back to the numpy implementation at import time.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tomobench.kernels._covariant_cy",
                ["src/tomobench/kernels/_covariant_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(
        "tomobench: compiled kernel disabled (%s); using numpy fallback\n" % exc
    )
    ext_modules = []

setup(ext_modules=ext_modules)
