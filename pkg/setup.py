"""Build script: compiles the optional Cython speedup kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a warning.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/bayescdm/kernels/_speedups.pyx",
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
        ext.define_macros = [("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]
except Exception as exc:  # pragma: no cover - build-environment dependent
    import warnings

    warnings.warn(f"Cython speedups not built ({exc}); using numpy fallback")
    ext_modules = []

setup(ext_modules=ext_modules)
