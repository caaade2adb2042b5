"""Build script for the optional compiled coder kernels.

The package is pure Python except for preqcode._kernels._speed, a Cython
twin of preqcode._kernels._pure.  The extension is marked optional: if it
cannot be built the install still succeeds and the pure kernels are used.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    speed = Extension(
        "preqcode._kernels._speed",
        ["src/preqcode/_kernels/_speed.pyx"],
        optional=True,
    )
    ext_modules = cythonize(
        [speed],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
