"""Setup configuration for trimode."""

from setuptools import setup, find_packages
import os

# Read the README file
def read_readme():
    readme_path = os.path.join(os.path.dirname(__file__), 'README.md')
    if os.path.exists(readme_path):
        with open(readme_path, 'r', encoding='utf-8') as f:
            return f.read()
    return "trimode - spectrum, readout and fitting toolkit for a three-mode superconducting qubit"

setup(
    name='trimode',
    version='0.1.0',
    description='Spectrum, dispersive readout, decoherence and fitting for a three-mode superconducting qubit',
    long_description=read_readme(),
    long_description_content_type='text/markdown',
    author='trimode developers',
    python_requires='>=3.9',
    package_dir={'': 'src'},
    packages=find_packages(where='src'),
    install_requires=[
        'numpy>=1.22',
        'scipy>=1.11',
        'pyyaml>=6.0',
        'tqdm>=4.60',
    ],
    extras_require={
        'test': ['pytest>=7.0'],
    },
    entry_points={
        'console_scripts': [
            'trimode=trimode.cli:main',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Physics',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
    ],
    keywords='superconducting qubit transmon circuit quantization dispersive readout fitting',
)
