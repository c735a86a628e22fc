"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy/pure-Python
fallback is selected at import time), so the build is marked optional and
a failed compile degrades gracefully.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    native = Extension(
        "motkit.kernels._native",
        sources=["src/motkit/kernels/_native.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    native.optional = True
    ext_modules = cythonize([native], language_level="3")
except ImportError:
    # No Cython available: ship the pure fallback only.
    pass

setup(ext_modules=ext_modules)
