from setuptools import setup, find_packages

setup(
    name="hofer",
    version="0.1",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy",
        "scipy",
        "sympy",
        "mpmath",
        "loguru",
        "pydantic>=2.5.0",
        "python-dotenv>=1.0.0",
        "orjson",
        "rich",
        "matplotlib>=3.8",
    ],
    entry_points={
        "console_scripts": [
            "hofer=entry.main:main",
        ],
    },
)
