import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "polykpz.kernels._cy_core",
                ["src/polykpz/kernels/_cy_core.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off: the numpy fallback must reproduce the
                # same floating point results, so FMA contraction is disabled.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level="3",
    )
except ImportError:
    # No Cython available: install with the pure numpy backend only.
    ext_modules = []

setup(ext_modules=ext_modules)
