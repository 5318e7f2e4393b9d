from setuptools import setup, find_packages

setup(
    name="ltv-gain-analysis",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples*"]),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pydantic>=2.0.0"
    ],
    extras_require={
        "test": [
            "pytest>=7.0.0",
            "pytest-asyncio>=0.21.0"
        ]
    },
    entry_points={
        "console_scripts": [
            "ltv-gain=src.cli:main"
        ]
    },
    python_requires=">=3.9",
)
