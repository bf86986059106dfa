from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("dsquant._bitpack", ["src/dsquant/_bitpack.pyx"])],
        language_level=3,
    )
except ImportError:
    # The package falls back to the NumPy kernels at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
