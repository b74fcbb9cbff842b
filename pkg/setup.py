from setuptools import find_packages, setup

setup(
    name="convlim",
    version="1.0.0",
    description="Exact convolution systems, projective limits and L2 product systems",
    packages=find_packages(include=["convlim", "convlim.*"]),
    data_files=[("schemas", ["schemas/system_description.schema.json"])],
    python_requires=">=3.9",
    install_requires=["jsonschema", "pandas", "pydantic>=2", "numpy"],
    extras_require={"test": ["pytest", "hypothesis"]},
    entry_points={"console_scripts": ["convlim=convlim.run_convlim:main"]},
)
