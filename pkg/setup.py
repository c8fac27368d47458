from setuptools import setup

setup(
    name="pwlr",
    version="0.1.0",
    description="Persistent Weisfeiler-Lehman random walk embeddings for graph classification",
    package_dir={"": "src"},
    py_modules=[
        "bench",
        "dataset",
        "diffusion",
        "errors",
        "evalkit",
        "filtration",
        "graph",
        "main",
        "manifest",
        "pipeline",
        "version",
    ],
    packages=["utils"],
    package_data={"utils": ["config.yaml", "assets/fixtures/*/*.txt"]},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.23.0",
        "PyYAML>=6.0",
        "scikit-learn>=1.1",
        "scipy>=1.8.1",
    ],
    extras_require={"dev": ["flake8", "networkx>=2.8", "pytest>=7.0"]},
    tests_require=["networkx>=2.8", "pytest>=7.0"],
    entry_points={"console_scripts": ["pwlr=main:run"]},
)
