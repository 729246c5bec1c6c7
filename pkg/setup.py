import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "transineq._kernels._simplex",
                sources=["src/transineq/_kernels/_simplex.pyx"],
                include_dirs=[np.get_include()],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # Pure-python fallback kernel is always available; the extension is a
    # speedup, not a requirement.
    ext_modules = []

setup(ext_modules=ext_modules)
