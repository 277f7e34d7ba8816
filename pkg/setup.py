#!/usr/bin/env python
#
# Copyright (c) 2025 The pyscaling authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

try:
    import setuptools
    from setuptools import setup
except ImportError:
    setuptools = None
    from distutils.core import setup

kwargs = {}

version = "0.1"

with open("README.md") as f:
    kwargs["long_description"] = f.read()
    kwargs["long_description_content_type"] = "text/markdown"

if setuptools is not None:
    install_requires = ["numpy", "pylru", "typer", "rich"]
    kwargs["install_requires"] = install_requires
    kwargs["extras_require"] = {"test": ["pytest"]}
    kwargs["entry_points"] = {"console_scripts": ["pyscaling = pyscaling.cli:main"]}

setup(
    name="pyscaling",
    version=version,
    packages=["pyscaling"],
    package_data={"pyscaling": ["data/corpus.txt"]},
    description="Scaling-law toolkit for decoder-only transformers",
    keywords=["transformer", "scaling", "flops", "kv cache", "chinchilla"],
    license="https://opensource.org/licenses/MIT",
    python_requires=">=3.8",
    classifiers=[
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: Implementation :: CPython"
    ],
    **kwargs
)
