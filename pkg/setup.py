"""Build script for the optional compiled routing kernels.

The package is pure Python plus one Cython extension; if the extension
fails to build or import, smarlab.kernels falls back to the numpy
reference implementation at import time.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "smarlab.kernels._routing",
        ["src/smarlab/kernels/_routing.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
