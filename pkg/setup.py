#!/usr/bin/env python
# -*- coding: utf-8 -*-
# `python setup.py upload` needs twine in the environment.

import io
import os
import subprocess
import sys
from shutil import rmtree

from setuptools import find_packages, setup, Command

NAME = 'bandlab'
DESCRIPTION = 'Random band matrices, Grassmann integrals and the sigma-model transfer operator.'
URL = 'https://github.com/bandlab-project/bandlab'
EMAIL = ''
AUTHOR = 'bandlab developers'
REQUIRES_PYTHON = '>=3.8.0'
VERSION = None

REQUIRED = ['numpy', 'scipy', 'json2html']

EXTRAS = {
    'tests': ['pytest', 'hypothesis'],
    'docs': ['sphinx', 'sphinx-glpi-theme'],
}

here = os.path.abspath(os.path.dirname(__file__))

try:
    with io.open(os.path.join(here, 'README.md'), encoding='utf-8') as fp:
        long_description = '\n' + fp.read()
except FileNotFoundError:
    long_description = DESCRIPTION

about = {}
if VERSION:
    about['__version__'] = VERSION
else:
    with open(os.path.join(here, NAME, '__init__.py')) as fp:
        exec(fp.read(), about)


class UploadCommand(Command):
    """ Builds sdist and wheel, uploads them with twine and tags the release. """

    description = 'Build and publish the package.'
    user_options = []

    def initialize_options(self):
        pass

    def finalize_options(self):
        pass

    def run(self):
        rmtree(os.path.join(here, 'dist'), ignore_errors=True)
        steps = [
            [sys.executable, 'setup.py', 'sdist', 'bdist_wheel'],
            ['twine', 'upload', 'dist/*'],
            ['git', 'tag', 'v{}'.format(about['__version__'])],
            ['git', 'push', '--tags'],
        ]
        for step in steps:
            print('\033[1m{}\033[0m'.format(' '.join(step)))
            subprocess.check_call(' '.join(step), shell=True, cwd=here)
        sys.exit()


setup(
    name=NAME,
    version=about['__version__'],
    description=DESCRIPTION,
    long_description=long_description,
    long_description_content_type='text/markdown',
    author=AUTHOR,
    author_email=EMAIL,
    python_requires=REQUIRES_PYTHON,
    url=URL,
    packages=find_packages(exclude=["tests", "tests.*"]),
    entry_points={
        'console_scripts': ['bandlab=bandlab.__main__:main'],
    },
    install_requires=REQUIRED,
    extras_require=EXTRAS,
    include_package_data=True,
    license='Apache-2.0',
    classifiers=[
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Physics',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    cmdclass={
        'upload': UploadCommand,
    },
)
