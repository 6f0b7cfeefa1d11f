#!/usr/bin/env python
#
# UTIL -- Utility classes and functions shared by the Terrain Lab modules.
#

from __future__ import print_function

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


"""
    Utilities shared by the Terrain Lab modules: the configuration error
    class, the location of the default configuration file, seeding and
    parameter validation helpers.

Import via

.. code-block:: python

    from tlab import Util
    from tlab.Util import tlConfigError, def_config
"""

import os
import math

import numpy as np


# Name of the default configuration shipped with the package.
DEF_CONFIG_NAME = 'tlab.conf'

# Environment variable that may point to an alternate default config.
CONFIG_ENV = 'TLAB_CONFIG'


# =========================================================================
#  Configuration error class
# =========================================================================

class tlConfigError(Exception):
    '''A throwable error class for invalid configuration values.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


# --------------------------------------------------------------------
# DEF_CONFIG -- Get the path of the default configuration file.
#
def def_config(path=None):
    ''' Get the configuration file to read.  If no path is provided,
        check for a $TLAB_CONFIG override and return that if it exists,
        otherwise default to the 'tlab.conf' shipped with the package.

        If a path is provided it must exist.
    '''
    if path is None or path == '':
        env_path = os.getenv(CONFIG_ENV, '')
        if env_path != '' and os.path.exists(env_path):
            return env_path
        return os.path.join(os.path.dirname(os.path.abspath(__file__)),
                            DEF_CONFIG_NAME)

    if not os.path.exists(path):
        raise tlConfigError("Configuration file '%s' not found" % path)
    return path


# --------------------------------------------------------------------
# MAKE_RNG -- Build a numpy Generator from a seed and optional sub-keys.
#
def make_rng(seed, *keys):
    '''Return a :class:`numpy.random.Generator` derived from `seed`.

    Parameters
    ----------
    seed : int
        Base seed of the run.

    keys : int
        Optional integers that select an independent stream, e.g. the
        index of a parallel environment.  The same (seed, keys) always
        yields the same stream.

    Example
    -------
    .. code-block:: python

        rngs = [make_rng(7, 1, i) for i in range(9)]   # one per env
    '''
    if keys:
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.default_rng(ss)


# --------------------------------------------------------------------
# VALIDATION -- Small checks used by the parameter classes.
#
def check_positive(name, value):
    '''Raise tlConfigError unless value is a finite number > 0.'''
    if value is None or not math.isfinite(value) or value <= 0:
        raise tlConfigError("'%s' must be positive, got %r" % (name, value))
    return value


def check_range(name, value, lo, hi, lo_open=False, hi_open=False):
    '''Raise tlConfigError unless lo <= value <= hi (or open bounds).'''
    if value is None or not math.isfinite(value):
        raise tlConfigError("'%s' must be a finite number, got %r" % (name, value))
    below = value <= lo if lo_open else value < lo
    above = value >= hi if hi_open else value > hi
    if below or above:
        raise tlConfigError("'%s' = %r is outside %s%s, %s%s" %
                            (name, value, '(' if lo_open else '[', lo,
                             hi, ')' if hi_open else ']'))
    return value


def check_choice(name, value, choices):
    '''Raise tlConfigError unless value is one of choices.'''
    if value not in choices:
        raise tlConfigError("'%s' must be one of %s, got %r" %
                            (name, '|'.join(choices), value))
    return value


def parse_floats(text):
    '''Parse a comma-separated list of numbers, e.g. "0.5, -2.5, 1".'''
    try:
        return tuple(float(v) for v in str(text).split(',') if v.strip() != '')
    except ValueError:
        raise tlConfigError("Cannot parse number list '%s'" % text)


def parse_ints(text):
    '''Parse a comma-separated list of integers, e.g. "10,20,40,70".'''
    try:
        return tuple(int(v) for v in str(text).split(',') if v.strip() != '')
    except ValueError:
        raise tlConfigError("Cannot parse integer list '%s'" % text)


def parse_bool(text):
    '''Parse the usual INI spellings of a boolean.'''
    val = str(text).strip().lower()
    if val in ('1', 'yes', 'true', 'on'):
        return True
    if val in ('0', 'no', 'false', 'off'):
        return False
    raise tlConfigError("Cannot parse boolean '%s'" % text)


# =========================================================================
#  PARAMSET -- Base class for the named parameter groups of a run.
#
#  Subclasses declare FIELDS, an ordered list of (name, parser, default)
#  tuples.  Values may be set from keywords or from the string values of
#  a ConfigParser section; to_strings() gives back the INI spelling.
# =========================================================================

class ParamSet(object):
    '''Named, defaulted parameter group backed by an INI section.
    '''
    FIELDS = ()

    def __init__(self, **kw):
        for name, parser, default in self.FIELDS:
            setattr(self, name, default)
        self.set(**kw)

    def set(self, **kw):
        ''' Set parameters by keyword, rejecting unknown names.
        '''
        known = self.names()
        for name, value in kw.items():
            if name not in known:
                raise tlConfigError("%s has no parameter '%s'" %
                                    (self.__class__.__name__, name))
            setattr(self, name, value)
        return self

    def update(self, section):
        ''' Update parameters from a mapping of INI strings.  Unknown keys
            are an error so a typo in a config file does not pass silently.
        '''
        parsers = dict((name, parser) for name, parser, default in self.FIELDS)
        for key, text in section.items():
            if key not in parsers:
                raise tlConfigError("%s has no parameter '%s'" %
                                    (self.__class__.__name__, key))
            try:
                setattr(self, key, parsers[key](text))
            except tlConfigError:
                raise
            except (TypeError, ValueError):
                raise tlConfigError("Bad value for '%s': %r" % (key, text))
        return self

    @classmethod
    def names(cls):
        return [f[0] for f in cls.FIELDS]

    def to_strings(self):
        ''' Return the parameters as an ordered list of (key, INI string).
        '''
        out = []
        for name in self.names():
            value = getattr(self, name)
            if isinstance(value, (tuple, list)):
                text = ','.join(repr(v) if isinstance(v, float) else str(v)
                                for v in value)
            elif isinstance(value, float):
                text = repr(value)
            elif value is None:
                text = ''
            else:
                text = str(value)
            out.append((name, text))
        return out

    def copy(self, **kw):
        new = self.__class__()
        for name in self.names():
            setattr(new, name, getattr(self, name))
        return new.set(**kw)

    def validate(self):
        return self

    def __eq__(self, other):
        return (self.__class__ is other.__class__ and
                all(getattr(self, n) == getattr(other, n) for n in self.names()))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return '%s(%s)' % (self.__class__.__name__,
                           ', '.join('%s=%r' % (n, getattr(self, n))
                                     for n in self.names()))


def optional_str(text):
    '''INI parser for an optional string: empty means None.'''
    text = str(text).strip()
    return text if text != '' else None
