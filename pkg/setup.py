"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure NumPy fallback is selected
at import time), so any failure here is downgraded to a warning.
"""

import sys

from setuptools import setup


def extensions():
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("dptoolkit: Cython unavailable, building without compiled kernels",
              file=sys.stderr)
        return []
    ext = Extension(
        "dptoolkit._core._speed",
        ["src/dptoolkit/_core/_speed.pyx"],
        # -ffp-contract=off keeps results bit-identical to the pure backend
        # (no fused multiply-add contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=extensions())
except SystemExit:
    raise
except Exception as exc:  # compiler missing, etc.
    print(f"dptoolkit: compiled kernels skipped ({exc}); installing pure build",
          file=sys.stderr)
    setup(ext_modules=[])
