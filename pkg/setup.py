import os
import sys

from setuptools import Extension, setup


def extensions():
    if os.environ.get("BRWTRACE_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        print("Cython/numpy unavailable; installing pure-Python kernels only", file=sys.stderr)
        return []
    npy_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext = Extension(
        "brwtrace._kernels",
        ["src/brwtrace/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[npy_random_lib],
        libraries=["npyrandom"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
