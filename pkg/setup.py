
from setuptools import setup

setup(name = 'fhmmdp',
    version = '1.0',
    description = 'Factorial HMM disaggregation and differentially private obfuscation of smart meter data',
    packages = ['fhmmdp'],
    python_requires = '>=3.8',
    install_requires = ['numpy', 'scipy', 'pandas', 'scikit-learn', 'pyyaml'],
    extras_require = {'test': ['pytest']},
    entry_points = {'console_scripts': ['fhmmdp = fhmmdp.cli:main']})
