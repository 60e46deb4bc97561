from inspect import isclass
import os
import importlib
import importlib.util
import sys
import logging
from pkgutil import iter_modules


from .simulation_resource import *
from .trajectory_loop_generator import *
from .integration_stages import *
from .probe_stage import *

#: searched for user classes before their subdirectories and the built-in modules
USER_DIRECTORIES = ('./', 'sfxflow_modules/')

_SKIPPED_MODULES = ('setup', 'sfxflow', 'conftest')


def _load_module(finder, name):
    spec = finder.find_spec(name)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


def _search_directories():
    '''
        ``USER_DIRECTORIES``, then their subdirectories (``sfxflow_modules/``
        first, hidden and cache directories skipped), then ``sfxflow/modules/``

    '''
    yield from USER_DIRECTORIES
    for top in reversed(USER_DIRECTORIES):
        for parent, dirs, _ in os.walk(top, followlinks=True):
            dirs[:] = sorted(d for d in dirs if not d.startswith(('.', '__')))
            for directory in dirs:
                yield os.path.join(parent, directory)
    yield os.path.dirname(__file__)


def find_class(classname, directory):
    '''
        Import the ``*.py`` files of ``directory`` until one defines
        ``classname``. Files that fail to import are skipped.

        :returns: ``class`` object, or ``None`` if not found

    '''
    for finder, name, _ in iter_modules([directory]):
        if name in _SKIPPED_MODULES:
            continue
        try:
            module = _load_module(finder, name)
        except Exception as e:
            logging.debug(f'skipping {directory}/{name}.py: {e}')
            continue
        found = getattr(module, classname, None)
        if isclass(found):
            logging.info(f'Using {classname} from {directory}/{name}.py')
            return found
    return None


def get_class(classname, path=None):
    '''
        Find a stage, generator or resource class by name. With ``path`` the
        class is taken from that python module, otherwise the working
        directory, ``./sfxflow_modules/``, their subdirectories and
        ``sfxflow/modules/`` are searched in that order::

            run:
                stages: [pump, field, bloch, noise, probe, MyStage]

        :param classname: class name to search for

        :param path: python path to module that class can be accessed from

        :returns: ``class`` object of desired class

    '''
    if path is not None:
        found_class = getattr(importlib.import_module(path), classname, None)
    else:
        candidates = (find_class(classname, directory) for directory in _search_directories())
        found_class = next((c for c in candidates if c is not None), None)

    if found_class is None:
        raise RuntimeError(f'no matching class {classname} found!')
    return found_class
