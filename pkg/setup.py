from setuptools import setup, Extension

import numpy as np

ext = Extension(
    "planedepth._trws_core",
    ["src/planedepth/_trws_core.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

try:
    from Cython.Build import cythonize

    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    # Source distributions without Cython fall back to the pure-Python solver.
    ext_modules = []

setup(ext_modules=ext_modules)
