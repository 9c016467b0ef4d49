"""Build script for the optional compiled kernels.

The package is fully functional without the extension: cipt._kernels falls
back to the pure numpy implementation at import time. Building the extension
requires Cython and a C compiler; if either is missing the install proceeds
with a warning instead of failing.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise install pure-python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            warnings.warn(f"compiled kernels skipped ({exc}); "
                          "cipt will use the pure numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({exc}); "
                          "cipt will use the pure numpy fallback")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; cipt will use the pure numpy fallback")
        return []
    from setuptools import Extension

    ext = Extension(
        "cipt._kernels._core",
        ["src/cipt/_kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
