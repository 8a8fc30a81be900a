import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "portraitstyle._convkernels",
                ["src/portraitstyle/_convkernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-funroll-loops"],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    # No Cython: the package still works on the pure-numpy kernel lane.
    ext_modules = []

setup(ext_modules=ext_modules)
