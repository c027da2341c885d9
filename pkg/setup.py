import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "detwalk._kernels",
        ["src/detwalk/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # identical float rounding to the pure-Python kernels
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
