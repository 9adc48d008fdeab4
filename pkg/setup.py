"""Build script: compiles the optional Cython tree kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a
pure-Python install instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/amrule/_tree_core.pyx"],
        compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False},
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"amrule: skipping compiled tree kernels ({exc}); "
                     "falling back to the pure-Python backend\n")
    ext_modules = []

setup(ext_modules=ext_modules)
