#!/usr/bin/env python3

from setuptools import setup
from stationsim import __version__

def readme():
    with open('README.org') as f:
        return f.read()


setup(name='stationsim',
      version=__version__,
      description='Similarity classification of public transit stations',
      long_description=readme(),
      classifiers=[],
      keywords=['transit','stations','similarity','record linkage',
                'random forest','openstreetmap'],
      license='BSD',
      packages=['stationsim', 'stationsim.utils', 'stationsim.helper'],
      package_data={'stationsim': ['data/stationsimrc', 'data/*.tsv']},
      zip_safe=False,
      python_requires='>=3.8',
      install_requires=[
          'numpy',
          'matplotlib',
          'lxml',
          'joblib',
          'scikit-learn',
          'tqdm'],
      extras_require={
          'tests': [
              'pytest',
              'pytest-cov'
          ],
          'docs': [
              'sphinx >= 1.4',
              'sphinx_rtd_theme']},
      entry_points={
          'console_scripts': ['stationsim = stationsim.cli:main']}
)
