import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="magsense",
    version="0.1.0",
    description="Simulation, filtering, control and precision bounds for "
                "continuously monitored atomic magnetometers",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["scripts", "scenarios"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    install_requires=[
        "numpy>=1.17",
        "scipy>=1.5",
        "pandas>=1.0",
        "munch>=2.5",
        "pyyaml>=5.1",
        "tqdm>=4.40",
    ],
    extras_require={
        "neptune": ["neptune-client>=0.9"],
    },
    python_requires='>=3.7'
)
