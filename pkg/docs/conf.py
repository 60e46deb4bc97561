# Sphinx configuration for the sfxflow documentation
import os
import sys
sys.path.insert(0, os.path.abspath('..'))

# heavy and optional dependencies are not needed to render the API pages
autodoc_mock_imports = ['h5py', 'yaml', 'yamlinclude', 'tqdm', 'numpy', 'mpi4py']

project = 'sfxflow'
copyright = '2021, sfxflow developers'
author = 'sfxflow developers'

with open(os.path.join(os.path.dirname(__file__), '..', 'VERSION')) as fh:
    release = fh.read().strip()

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'recommonmark'
]
autodoc_member_order = 'bysource'

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
