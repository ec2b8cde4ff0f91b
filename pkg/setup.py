"""Build script for the optional compiled kernels.

The package works without the extension: ``eigdpp._backend`` falls back to
the numpy implementation in ``eigdpp._kernels_py`` when the import fails.
"""
from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source installs without Cython
    ext_modules = []
else:
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "eigdpp._kernels",
                ["src/eigdpp/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
