#!/usr/bin/env python
#
# RUNCONFIG -- The layered INI configuration of a pipeline run.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    A run is configured by the packaged 'tlab.conf' (every default),
    optionally overlaid by a user file and then by command-line flags.
    Each section maps onto one parameter class:

        [run]               seed, out
        [terrain]           heightField.TerrainParams
        [robot]             robot.RobotParams
        [task]              episode.TaskConstants
        [ppo]               ppo.PpoConfig shared by both stages
        [ppo.initial-flat]  per-stage overrides
        [ppo.general]
        [telemetry]         telemetry.TelemetryParams
        [gmm]               gmm.GmmParams
        [report]            ReportParams

    Config Interface
    ----------------

        cfg = read_config  (path, overrides)
              write_config (cfg, path)
        cfg.validate ()

Import via

.. code-block:: python

    from tlab.runConfig import read_config
'''

import os
import logging

import configparser as ConfigParser

from tlab.Util import tlConfigError, ParamSet, def_config
from tlab.Util import parse_floats, check_positive
from tlab.heightField import TerrainParams
from tlab.robot import RobotParams
from tlab.episode import TaskConstants
from tlab.ppo import PpoConfig
from tlab.telemetry import TelemetryParams
from tlab.gmm import GmmParams


logger = logging.getLogger('tlab.runConfig')

STAGES = ('initial-flat', 'general')
STAGE_N_ENVS = {'initial-flat': 9, 'general': 8}


class RunParams(ParamSet):
    FIELDS = (
        ('seed', int, 0),
        ('out',  str, 'tlab_out'),
    )

    def validate(self):
        if int(self.seed) < 0:
            raise tlConfigError("'seed' must be >= 0, got %r" % self.seed)
        if str(self.out).strip() == '':
            raise tlConfigError("'out' must name a directory")
        return self


class ReportParams(ParamSet):
    '''Report, evaluation and calibration settings ([report] section).
    '''
    FIELDS = (
        ('histogram_window',   int,          100),
        ('histogram_bins',     int,          40),
        ('eval_trials',        int,          50),
        ('calibration_window', int,          70),
        ('calibration_band',   parse_floats, (0.05, 0.20)),
    )

    def validate(self):
        for name in ('histogram_window', 'calibration_window'):
            if int(getattr(self, name)) < 2:
                raise tlConfigError("'%s' must be >= 2" % name)
        if int(self.histogram_bins) < 1 or int(self.eval_trials) < 1:
            raise tlConfigError("'histogram_bins' and 'eval_trials' must be >= 1")
        band = tuple(self.calibration_band)
        if len(band) != 2 or not band[0] < band[1]:
            raise tlConfigError("'calibration_band' must be 'low,high' with low < high")
        check_positive('calibration_band', band[1])
        return self


# =========================================================================
#  RUNCONFIG -- All parameter groups of one run.
# =========================================================================

class RunConfig(object):
    '''
         RUNCONFIG -- Every parameter group of a run, all defaulted.
    '''
    def __init__(self):
        self.run = RunParams()
        self.terrain = TerrainParams()
        self.robot = RobotParams()
        self.task = TaskConstants()
        self.ppo = dict((s, PpoConfig(n_envs=STAGE_N_ENVS[s])) for s in STAGES)
        self.telemetry = TelemetryParams()
        self.gmm = GmmParams()
        self.report = ReportParams()

    @property
    def seed(self):
        return int(self.run.seed)

    @property
    def out(self):
        return self.run.out

    def sections(self):
        ''' Ordered (section name, ParamSet) pairs.
        '''
        out = [('run', self.run), ('terrain', self.terrain),
               ('robot', self.robot), ('task', self.task)]
        out.extend(('ppo.%s' % s, self.ppo[s]) for s in STAGES)
        out.extend([('telemetry', self.telemetry), ('gmm', self.gmm),
                    ('report', self.report)])
        return out

    def validate(self):
        ''' Validate every group; raises tlConfigError on the first problem.
        '''
        for name, params in self.sections():
            try:
                params.validate()
            except tlConfigError as e:
                raise tlConfigError("[%s] %s" % (name, e))
        for s in STAGES:
            if self.ppo[s].batch_size > self.ppo[s].n_envs * self.ppo[s].rollout_steps:
                raise tlConfigError("[ppo.%s] batch_size exceeds the rollout size" % s)
        return self

    def apply_overrides(self, overrides):
        ''' Apply command-line overrides: seed, out, steps.
        '''
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            try:
                if key == 'seed':
                    self.run.seed = int(value)
                elif key == 'out':
                    self.run.out = str(value)
                elif key == 'steps':
                    for s in STAGES:
                        self.ppo[s].total_steps = int(value)
                else:
                    raise tlConfigError("Unknown override '%s'" % key)
            except ValueError:
                raise tlConfigError("Bad value for --%s: %r" % (key, value))
        return self

    def to_parser(self):
        cp = ConfigParser.RawConfigParser()
        for name, params in self.sections():
            cp.add_section(name)
            for key, text in params.to_strings():
                cp.set(name, key, text)
        return cp


def _known_sections():
    return set(['run', 'terrain', 'robot', 'task', 'ppo', 'telemetry', 'gmm',
                'report'] + ['ppo.%s' % s for s in STAGES])


# --------------------------------------------------------------------
# READ_CONFIG -- Layer the packaged defaults, a user file and overrides.
#
def _read_layer(path):
    cp = ConfigParser.RawConfigParser()
    try:
        with open(path) as fd:
            cp.read_file(fd, source=path)
    except ConfigParser.Error as e:
        raise tlConfigError("Cannot parse '%s': %s" % (path, e))
    unknown = set(cp.sections()) - _known_sections()
    if unknown:
        raise tlConfigError("Unknown config section(s) in '%s': %s" %
                            (path, ', '.join(sorted(unknown))))
    logger.debug("Read configuration %s" % path)
    return cp


def _apply_layer(cfg, cp):
    ''' Apply one file: plain sections, then per stage the shared [ppo]
        keys followed by that stage's own section.
    '''
    for name, params in [('run', cfg.run), ('terrain', cfg.terrain),
                         ('robot', cfg.robot), ('task', cfg.task),
                         ('telemetry', cfg.telemetry), ('gmm', cfg.gmm),
                         ('report', cfg.report)]:
        if cp.has_section(name):
            _update(params, name, cp.items(name))
    for s in STAGES:
        if cp.has_section('ppo'):
            _update(cfg.ppo[s], 'ppo', cp.items('ppo'))
        if cp.has_section('ppo.%s' % s):
            _update(cfg.ppo[s], 'ppo.%s' % s, cp.items('ppo.%s' % s))


def read_config(path=None, overrides=None):
    '''Build a validated RunConfig.

    Layers apply in order: the packaged defaults, the user file, the
    overrides.  Within a file the stage sections refine its [ppo]
    section, and a later file's [ppo] keys override an earlier file's
    stage sections.

    Parameters
    ----------
    path : str or None
        User INI file layered over the packaged defaults.

    overrides : dict or None
        Command-line values for 'seed', 'out' and 'steps'.

    Raises
    ------
    tlConfigError
        On a missing file, an unknown section or key, or a bad value.
    '''
    files = [def_config()]
    if path:
        if not os.path.exists(path):
            raise tlConfigError("Configuration file '%s' not found" % path)
        files.append(path)

    cfg = RunConfig()
    for f in files:
        _apply_layer(cfg, _read_layer(f))
    cfg.apply_overrides(overrides)
    return cfg.validate()


def _update(params, section, items):
    try:
        params.update(dict(items))
    except tlConfigError as e:
        raise tlConfigError("[%s] %s" % (section, e))


def write_config(cfg, path):
    ''' Write the effective configuration to `path`.
    '''
    with open(path, 'w') as fd:
        cfg.to_parser().write(fd)
    logger.info("Wrote effective configuration %s" % path)
