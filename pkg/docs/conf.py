# Sphinx configuration for the bandlab documentation.
import os
import sys
sys.path.insert(0, os.path.abspath('..'))

from bandlab import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = 'bandlab'
copyright = '2024, bandlab developers'
author = 'bandlab developers'
release = __version__

# -- General configuration ---------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.coverage', 'sphinx.ext.napoleon', 'sphinx.ext.mathjax',
              'sphinx.ext.githubpages']
templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'
autodoc_mock_imports = ['json2html']

# -- Options for HTML output -------------------------------------------------

import sphinx_glpi_theme  # noqa: E402

html_theme = "glpi"
html_theme_path = sphinx_glpi_theme.get_html_themes_path()
html_static_path = ['_static']
