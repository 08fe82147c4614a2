from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; horoke falls back at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "horoke._kernels",
                ["src/horoke/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
