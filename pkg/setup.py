from setuptools import find_packages, setup

with open("requirements.txt") as fh:
    requirements = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

setup(
    name="msgv",
    version="0.1.0",
    description="Motion-style video GAN with attention-modulated convolutions, at desk scale",
    packages=find_packages(exclude=("test", "test.*", "examples", "examples.*")),
    install_requires=[r for r in requirements if r not in ("setuptools", "pytest")],
    extras_require={"test": ["pytest"]},
    entry_points={
        "console_scripts": [
            "msgv = cli.cli:main",
        ],
    },
    python_requires=">=3.9",
)
