#!/usr/bin/env python3
"""
Setup script for measure2shape
"""
from setuptools import setup, find_packages

# Read the README file
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Read requirements
with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [line.split("#")[0].strip() for line in fh
                    if line.strip() and not line.startswith("#")]

setup(
    name="measure2shape",
    version="1.0.0",
    description="Estimate 3D shapes from anthropometric measurements with a PCA shape space "
                "and two-stage mesh refinement",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["examples", "examples.*"]),
    py_modules=["cli"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[r for r in requirements if not r.startswith("pytest")],
    extras_require={
        "dev": [
            "pytest>=8.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "measure2shape=cli:cli",
        ],
    },
    include_package_data=True,
    data_files=[("templates", ["templates/experiment_summary.md.j2"])],
)
