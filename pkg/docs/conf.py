#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
#
# This file does only contain a selection of the most common options. For a
# full list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

from datetime import datetime
import os
import sys

sys.path.insert(0, os.path.abspath('../'))

import stationsim  # noqa: E402

# -- Project information -----------------------------------------------------

project = u'stationsim'
author = u'The stationsim developers'
copyright = u'2020–{0}, '.format(datetime.utcnow().year) + author

# The short X.Y version.
version = '.'.join(stationsim.__version__.split('.', 2)[:2])
# The full version, including alpha/beta/rc tags.
release = stationsim.__version__


# -- General configuration ---------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.napoleon',
              'sphinx.ext.mathjax', 'sphinx.ext.coverage',
              'sphinx.ext.doctest', 'sphinx.ext.intersphinx']
# napoleon: alternative to numpydoc -- looks a bit worse.
napoleon_google_docstring = False
napoleon_use_param = False
napoleon_use_ivar = True

source_suffix = ['.rst']
master_doc = 'index'
language = None
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'  # 'alabaster'
html_theme_options = {}
htmlhelp_basename = 'stationsimdoc'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'matplotlib': ('https://matplotlib.org/stable/', None),
    'joblib': ('https://joblib.readthedocs.io/en/latest/', None),
    'lxml': ('https://lxml.de/apidoc/', None),
}
