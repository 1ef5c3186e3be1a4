from setuptools import setup, find_packages

with open("README.md") as f:
    long_description = f.read()

name = "manipatch"

setup(
    name=name,
    version="0.1.0",
    description="Validated parameterizations of stable and unstable manifolds of polynomial vector fields.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    packages=find_packages(where=".", exclude=["tests", "tests.*"]),
    package_data={name: ["data/manipatch.yml", "data/problems/*.json"]},
    entry_points={
        "console_scripts": [
            f"{name} = {name}.main:app",
        ],
    },
    python_requires=">=3.8",
    install_requires=[
        "deepmerge>=1.1.0,<2.0.0",
        "numpy>=1.22",
        "pandas>=1.5",
        "pydantic>=1.9,<2.0",
        "pyyaml>=6.0",
        "rich>=12.0",
        "sympy>=1.10",
        "tqdm>=4.64.1,<5.0.0",
        "typer>=0.9.0",
        "typing-extensions>=4.4.0,<5.0.0",
    ],
    extras_require={
        "tests": [
            "pytest",
        ],
    },
    zip_safe=False,
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Education",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Software Development :: Libraries :: Python Modules",
    ],
    keywords="{} invariant manifolds parameterization method radii polynomials interval arithmetic".format(name),
)
