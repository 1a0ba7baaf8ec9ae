"""Build script: compiles the optional Cython kernel extension.

The extension is marked optional; if Cython or a C compiler is missing the
package still installs and falls back to the pure-Python kernels in
``fingap._core.reference``.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    if not os.path.exists("src/fingap/_core/_fast.pyx"):
        raise ImportError
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fingap._core._fast",
                ["src/fingap/_core/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
