import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "saddlesor._kernels",
                ["src/saddlesor/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3, "embedsignature": True},
    )
except ImportError:
    # no Cython: ship without the extension, the package falls back to Python kernels
    extensions = []

setup(ext_modules=extensions)
