"""Build script: compiles the optional fast kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile degrades to a warning instead of killing
the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain, ...
            warnings.warn(f"fast-kernel build failed ({exc}); using pure-python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"fast-kernel build failed ({exc}); using pure-python backend")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython/numpy unavailable at build time; skipping fast kernels")
        return []
    ext = Extension(
        "impactlab._hot",
        ["src/impactlab/_hot.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps the C arithmetic bit-compatible with the
        # numpy fallback (no fused multiply-add) so the backends can be
        # cross-checked tightly.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
