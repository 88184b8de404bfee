import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "transpec._backend._core",
                ["src/transpec/_backend/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python backend is selected at import time when the extension
    # is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
