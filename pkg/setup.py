"""Builds the Cython compositing kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile should not block a source install:
run with AVF_SKIP_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("AVF_SKIP_EXT"):
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/avf/gsplat/_compose_cy.pyx"],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(np.get_include())

setup(ext_modules=ext_modules)
