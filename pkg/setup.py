"""Build script for the optional compiled rule-matching kernel.

The package works without the extension: sensorcep.kernel falls back to the
pure-Python implementation when the compiled module is absent. Set
SENSORCEP_PURE=1 to skip compilation entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SENSORCEP_PURE") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/sensorcep/_kernel.pyx"],
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
