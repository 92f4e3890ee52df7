from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
    import numpy as np
except ImportError:  # fall back to the pure-Python engine
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "rkhs_streamci._core",
                ["src/rkhs_streamci/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-funroll-loops"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
