"""Build script for the optional compiled kernels.

The Cython extension is skipped (and the numpy fallback used at import time)
when Cython or a C compiler is unavailable.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("RCRP_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "rcrp._kernels",
                    ["src/rcrp/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
