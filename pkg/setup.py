"""Build hook for the optional MPFR extension.

The package works without it (pure-Python fallback); set
MPGAME_NO_EXTENSION=1 to skip the compile step entirely.
"""

import os
import sys

from setuptools import setup


def _extensions():
    if os.environ.get("MPGAME_NO_EXTENSION"):
        return []
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
        import gmpy2
    except ImportError:
        return []
    gmpy2_dir = os.path.dirname(gmpy2.__file__)
    ext = Extension(
        "mpgame._ckernels",
        ["src/mpgame/_ckernels.pyx"],
        libraries=["mpfr", "gmp"],
        # system gmp/mpfr headers win; gmpy2's dir only supplies gmpy2.h and mpc.h
        extra_compile_args=["-O3", "-idirafter", gmpy2_dir],
    )
    return cythonize(
        [ext],
        include_path=[os.path.dirname(gmpy2_dir)],
        compiler_directives={"language_level": 3},
        quiet=True,
    )


def main():
    exts = _extensions()
    try:
        setup(ext_modules=exts)
    except SystemExit:
        raise
    except Exception as exc:  # compiler missing etc.
        if not exts:
            raise
        print(f"warning: extension build failed ({exc}); using pure-Python kernels", file=sys.stderr)
        setup(ext_modules=[])


main()
