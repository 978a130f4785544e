"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (the pure-NumPy
backend is selected at import time), so the build is marked optional and
failures degrade to a pure install.  Set SMILEPC_SKIP_EXT=1 to skip the
extension on purpose.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("SMILEPC_SKIP_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "smilepc.kernels._compiled",
        sources=["src/smilepc/kernels/_compiled.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
