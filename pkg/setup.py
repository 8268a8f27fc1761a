"""Build script: compiles the optional Cython aggregation kernel.

The package is fully functional without the extension; condshap.kernels
falls back to a vectorized NumPy implementation when the compiled module
is absent or CONDSHAP_PURE=1 is set.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "condshap._fastkernels",
                ["src/condshap/_fastkernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
