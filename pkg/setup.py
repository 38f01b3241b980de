import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -march=native keeps the stencil loops vectorized (FMA); this package is
# built from source in place, never shipped as a binary wheel.
compile_args = [
    "-O3",
    "-march=native",
    "-mprefer-vector-width=512",
    "-fopenmp",
]
link_args = ["-fopenmp"]
if os.environ.get("CRIBWATCH_NO_OPENMP"):
    compile_args.remove("-fopenmp")
    link_args = []

extensions = [
    Extension(
        "cribwatch._kernels_cy",
        ["src/cribwatch/_kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
)
