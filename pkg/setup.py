import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [Extension("liekit._dopri", ["src/liekit/_dopri.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O2", "-ffp-contract=off"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
