"""Build the optional compiled Jacobi kernels.

The package works without them: ``qbtrace._kernels_py`` is used when the
extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("QBTRACE_NO_EXT"):
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
                    "qbtrace._kernels",
                    [os.path.join("src", "qbtrace", "_kernels.pyx")],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
