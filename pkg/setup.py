import os

from tlab.__version__ import __version__ as tlab_version

## Build the list of scripts to be installed.
script_dir = 'scripts'
scripts = []
for script in os.listdir(script_dir):
    if script[-1] in [ "~", "#"]:
        continue
    scripts.append(os.path.join(script_dir,script))

try:
    from setuptools import setup, find_packages
    has_setuptools = True
except:
    from distutils.core import setup
    has_setuptools = False

import unittest
def my_test_suite():
    test_loader = unittest.TestLoader()
    test_suite = test_loader.discover('tests', pattern='test_*.py')
    return test_suite

setup(name="terrain-lab",
      version=tlab_version,
      url="https://github.com/terrainlab/terrain-lab/",
      description="Terrain classification from the orientation of a wheeled robot.",
      author="Terrain Lab",
      author_email="terrainlab@users.noreply.github.com",
      long_description="Procedural terrain, a PPO-trained target-reaching "
                       "robot, orientation telemetry and a two-component "
                       "Gaussian mixture that labels flat and rough ground",
      packages=find_packages(exclude=['tests', 'tests.*']),
      package_data ={
        'tlab': ['tlab.conf']
      },
      scripts=scripts,
      test_suite='setup.my_test_suite',
      classifiers=[
          'Development Status :: 4 - Beta',
          'Environment :: Console',
          'Intended Audience :: Science/Research',
          'Operating System :: POSIX',
          'Programming Language :: Python :: 3',
          'Topic :: Scientific/Engineering',
        ],
      python_requires='>=3.7',
      install_requires=['numpy>=1.20', 'scipy>=1.4.1', 'pandas>=1.0',
                        'scikit-learn>=0.24.1', 'torch>=1.10'],
      extras_require={'test': ['pytest']},
      )
