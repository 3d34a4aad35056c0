"""Build script for the optional compiled kernel extension.

The package is pure Python plus one Cython extension holding the hot
inner loops (distance evaluation, best-first graph traversal, ADC code
scans).  If no C compiler or Cython is available the build degrades to
the NumPy fallback backend; everything still works, just slower.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the accelerator if possible, warn and continue if not."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        sys.stderr.write(
            "\nWARNING: compiled kernels could not be built (%s).\n"
            "Falling back to the pure NumPy backend.\n\n" % exc
        )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        sys.stderr.write("WARNING: %s; skipping compiled kernels.\n" % exc)
        return []
    ext = Extension(
        "streamknn.kernels._accel",
        ["src/streamknn/kernels/_accel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
