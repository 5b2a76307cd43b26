import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "kamtorus._kernels._orbit_cy",
                ["src/kamtorus/_kernels/_orbit_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # pure-Python install still works; the numpy kernels take over at import
    ext_modules = []

setup(ext_modules=ext_modules)
