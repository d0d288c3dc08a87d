"""Build the optional Cython kernel extension.

If Cython or a C compiler is unavailable the package still installs; the
pure-Python kernels in ``ipdfp._kernels_py`` are used instead.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("IPDFP_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ipdfp._kernels_ext",
                    ["src/ipdfp/_kernels_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
