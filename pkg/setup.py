from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("lattice_spde._kernels", ["src/lattice_spde/_kernels.pyx"], include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )
except ImportError:
    # no Cython/NumPy at build time: the package falls back to the NumPy stepper
    ext_modules = []

setup(ext_modules=ext_modules)
