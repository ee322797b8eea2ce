"""Build the compiled move-generation kernel.

The kernel source (src/vamchess/_movegen.py) is written in Cython
pure-Python mode: the same file runs interpreted when the extension is
not built. Set VAMCHESS_NO_EXTENSION=1 to skip compilation.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("VAMCHESS_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("vamchess._movegen", ["src/vamchess/_movegen.py"])],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
            },
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
