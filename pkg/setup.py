from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fall back to the pure-Python kernel
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("damreg.lp._simplex_cy", ["src/damreg/lp/_simplex_cy.pyx"],
                   extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
        language_level=3,
    )

setup(ext_modules=ext_modules)
