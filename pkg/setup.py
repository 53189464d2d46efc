"""Build the optional compiled kernels.

A failed or skipped build leaves the package on its pure-Python kernels.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("OBSTACLE_LAB_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "obstacle_lab._kernels",
                    ["src/obstacle_lab/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
