import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="survcontrasts",
    version="0.1.0",
    author="survcontrasts developers",
    description="Multiple contrast tests for right-censored survival data",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: GNU General Public License v2 or later (GPLv2+)",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.7",
    install_requires=["numpy", "scipy", "pandas", "PyYAML", "joblib"],
    extras_require={"test": ["pytest", "pytest-datadir", "lifelines"]},
    entry_points={"console_scripts": ["survcontrasts=survcontrasts.app:main"]},
)
