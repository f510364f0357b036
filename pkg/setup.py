"""Build the optional Cython kernels.

Set STARKPROBE_NO_EXT=1 to skip compilation; the package then runs on the
numpy fallback in ``starkprobe._kernels_py``.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("STARKPROBE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "starkprobe._kernels",
                    ["src/starkprobe/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
