import os
import sys

import numpy as np
from setuptools import Extension, setup

if sys.platform.startswith("win"):
    compile_args = ["/O2", "/openmp"]
    link_args = []
else:
    compile_args = ["-O3", "-march=native", "-fopenmp"]
    link_args = ["-fopenmp"]

ext_modules = []
if os.environ.get("JOINTFILTER_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "jointfilter._kernels",
                    ["src/jointfilter/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
