"""Build script for the optional compiled kernels.

The package is pure Python except for ``tdp.kernels._core``, a Cython
extension holding the hot attack loops (nearest-neighbor search and box
membership). If Cython or a C compiler is unavailable the build falls back
to the pure-numpy implementations in ``tdp.kernels._fallback``; nothing
else changes.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tdp.kernels._core",
                ["src/tdp/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
