#!/usr/bin/env python
#
# TLTASKS.PY -- Task routines for the 'tlab' command-line client.
#

from __future__ import print_function

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


"""
    Task routines for the 'tlab' command-line client.  Every subcommand
    is a Task with named Options; all stages read the layered run
    configuration and exchange data through the artifact tree below the
    output directory:

        config.ini                          effective configuration
        tlab.log                            log of every task run
        terrain.npz                         gen-terrain
        models/<stage>.npz                  train
        logs/train_<stage>.csv              train
        logs/episodes_<stage>.csv           train
        telemetry/trajectory_<area>.csv     collect
        sweep/features_w<w>.csv             sweep
        sweep/gmm_w<w>.json                 sweep
        sweep/confusion_w<w>.csv            sweep
        sweep/sweep.csv                     sweep
        report/*.csv                        report, evaluate
        calibration.csv                     calibrate

Import via

.. code-block:: python

    from tlab import tltasks
"""

import os
import sys
import logging
import optparse
from collections import OrderedDict

import numpy as np
import pandas as pd

from tlab.__version__ import __version__ as tlab_version
from tlab.Util import tlConfigError, make_rng
from tlab.runConfig import read_config, write_config, STAGES
from tlab import heightField
from tlab import episode as ep
from tlab import policy as pol
from tlab import ppo
from tlab import telemetry
from tlab import gmm
from tlab import evaluation
from tlab.helpers import utils
from tlab.helpers import cluster


AREAS = ('flat', 'rough')
PIPELINE_STAGES = ('gen-terrain', 'initial-flat', 'general', 'collect',
                   'sweep', 'report')

logger = logging.getLogger('tlab.tltasks')


class tlArtifactError(Exception):
    '''A throwable error class for missing or unreadable artifacts.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class tlUsageError(Exception):
    '''Bad command line.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


def parseSelf(obj):
    opt = optparse.Values()
    for attr in dir(obj):
        if isinstance(getattr(obj, attr), Option):
            opt.ensure_value(attr, getattr(obj, attr).value)
    return opt


class Option:
    '''
         Represents an option
    '''
    def __init__(self, name, value, description, display=None, default=None,
                    required=False):
        self.name = name
        self.value = value
        self.display = display
        self.description = description
        self.default = default
        self.required = required


# =========================================================================
#  TERRAINLAB -- Artifact tree of one output directory.
# =========================================================================

class TerrainLab:
    '''
        Paths of the artifacts below an output directory and the guards
        that name the stage to run when one is missing.
    '''
    def __init__(self, out='tlab_out'):
        self.out = out

    def path(self, *parts):
        return os.path.join(self.out, *parts)

    @property
    def config(self):
        return self.path('config.ini')

    @property
    def logfile(self):
        return self.path('tlab.log')

    @property
    def terrain(self):
        return self.path('terrain.npz')

    def model(self, stage):
        return self.path('models', '%s.npz' % stage)

    def train_log(self, stage):
        return self.path('logs', 'train_%s.csv' % stage)

    def episode_log(self, stage):
        return self.path('logs', 'episodes_%s.csv' % stage)

    def trajectory(self, area):
        return self.path('telemetry', 'trajectory_%s.csv' % area)

    def features(self, window):
        return self.path('sweep', 'features_w%d.csv' % window)

    def gmm(self, window):
        return self.path('sweep', 'gmm_w%d.json' % window)

    def confusion(self, window):
        return self.path('sweep', 'confusion_w%d.csv' % window)

    @property
    def sweep(self):
        return self.path('sweep', 'sweep.csv')

    def report(self, name):
        return self.path('report', name)

    @property
    def calibration(self):
        return self.path('calibration.csv')

    def require(self, path, stage):
        ''' Raise tlArtifactError naming `stage` unless `path` exists.
        '''
        if not os.path.exists(path):
            raise tlArtifactError("Missing artifact %s: run %s first" % (path, stage))
        return path


# =========================================================================
#  Stage implementations
# =========================================================================

def gen_terrain(cfg, lab):
    ''' Generate the terrain and write terrain.npz.
    '''
    field = heightField.generate_from(cfg.terrain, cfg.seed)
    utils.ensure_dir(lab.terrain)
    field.save(lab.terrain)
    return field


def load_terrain(lab):
    lab.require(lab.terrain, 'gen-terrain')
    try:
        return heightField.HeightField.load(lab.terrain)
    except (IOError, OSError, KeyError, ValueError,
            heightField.tlTerrainError) as e:
        raise tlArtifactError("Cannot read %s: %s" % (lab.terrain, e))


def env_factory(cfg, field, stage):
    ''' Factory of the training environments of `stage`.

        The general stage puts its first n_envs//2 environments in the
        flat area and the rest in the rough area.
    '''
    n_envs = int(cfg.ppo[stage].n_envs)
    key = STAGES.index(stage)

    def make(i):
        if stage == 'general' and i >= n_envs // 2:
            area = field.rough_rect
        else:
            area = field.flat_rect
        return ep.TargetReachEnv(field, area, cfg.robot, cfg.task,
                                 rng=make_rng(cfg.seed, 1, key, i),
                                 name='%s-%d' % (area.label, i))
    return make


def train_stage(cfg, lab, stage):
    ''' Train one PPO stage; writes the model and both logs.
    '''
    if stage not in STAGES:
        raise tlConfigError("Unknown stage '%s', use one of %s" %
                            (stage, '|'.join(STAGES)))
    field = load_terrain(lab)
    config = cfg.ppo[stage]
    initial = config.pretrain_checkpoint
    if stage == 'general' and initial is None:
        initial = lab.require(lab.model('initial-flat'),
                              'train --stage initial-flat')
    if initial is not None and not os.path.exists(initial):
        raise tlArtifactError("Pretrain checkpoint %s not found" % initial)

    def on_checkpoint(iteration, env_steps, net, vnet):
        path = lab.path('models', '%s_iter%04d.npz' % (stage, iteration))
        pol.save_checkpoint(utils.ensure_dir(path), net, vnet,
                            dict(stage=stage, env_steps=env_steps,
                                 seed=cfg.seed, iteration=iteration))

    result = ppo.train(config, env_factory(cfg, field, stage), initial,
                       seed=cfg.seed + STAGES.index(stage),
                       on_checkpoint=on_checkpoint)
    pol.save_checkpoint(utils.ensure_dir(lab.model(stage)), result.policy,
                        result.value, dict(stage=stage, seed=cfg.seed,
                                           env_steps=result.env_steps))
    utils.write_csv(result.log, lab.train_log(stage))
    utils.write_csv(result.episodes, lab.episode_log(stage))
    return result


def resolve_model(lab, model):
    ''' A stage name or a checkpoint path -> checkpoint path.
    '''
    if model in STAGES:
        return lab.require(lab.model(model), 'train --stage %s' % model)
    if not os.path.exists(model):
        raise tlArtifactError("Model %s not found: run train first" % model)
    return model


def _area_rect(field, area):
    if area not in AREAS:
        raise tlConfigError("Unknown area '%s', use flat|rough" % area)
    return field.flat_rect if area == 'flat' else field.rough_rect


def collect_area(cfg, lab, area, model='general'):
    ''' Collect the telemetry trajectory of one area.
    '''
    field = load_terrain(lab)
    rect = _area_rect(field, area)
    path = resolve_model(lab, model)
    traj = telemetry.collect(path, rect, field, int(cfg.telemetry.n_steps),
                             int(cfg.telemetry.discard),
                             cfg.seed + AREAS.index(area), cfg.robot, cfg.task,
                             deterministic=cfg.telemetry.deterministic)
    utils.write_csv(traj, lab.trajectory(area))
    return traj


def load_trajectory(lab, area):
    path = lab.require(lab.trajectory(area), 'collect --area %s' % area)
    traj = utils.convert(path)
    if len(traj) == 0:
        raise tlArtifactError("Trajectory %s is empty; collect more steps "
                              "than are discarded" % path)
    return traj


def sweep(cfg, lab):
    ''' Window sweep over the flat and rough trajectories.
    '''
    trajs = [load_trajectory(lab, a) for a in AREAS]
    try:
        results, table = gmm.window_sweep(trajs, cfg.gmm.windows, cfg.gmm,
                                          stride=int(cfg.telemetry.stride),
                                          seed=cfg.seed)
    except gmm.tlGMMError as e:
        raise tlArtifactError("Sweep failed: %s" % e)
    for r in results:
        utils.write_csv(r.features, lab.features(r.window))
        utils.write_json(r.model.to_json(
            accuracy=r.evaluation.accuracy,
            recall=r.evaluation.recall,
            confusion=r.evaluation.confusion.tolist()), lab.gmm(r.window))
        utils.write_csv(cluster.confusion_frame(r.evaluation.confusion),
                        lab.confusion(r.window))
    utils.write_csv(table, lab.sweep)
    return results, table


def report(cfg, lab):
    ''' Summary tables and plot data from the sweep artifacts.
    '''
    lab.require(lab.sweep, 'sweep')
    trajs = OrderedDict((a, load_trajectory(lab, a)) for a in AREAS)
    windows = list(cfg.gmm.windows)
    written = []

    # sin(theta_x) / sin(theta_z) time series per area
    for area, traj in trajs.items():
        ts = traj[['step', 'time', 'sin_theta_x', 'sin_theta_z']]
        written.append(utils.write_csv(ts, lab.report('timeseries_%s.csv' % area)))

    # rolling-std distributions on shared bins
    h_windows = sorted(set(windows + [int(cfg.report.histogram_window)]))
    for w in h_windows:
        if min(len(t) for t in trajs.values()) < w:
            logger.warning("Skipping the window-%d histogram: trajectories "
                           "are shorter than the window" % w)
            continue
        groups = OrderedDict(
            (a, telemetry.rolling_std(t['sin_theta_x'].values, w,
                                      int(cfg.telemetry.stride)).values)
            for a, t in trajs.items())
        df = utils.histogram_frame(groups, int(cfg.report.histogram_bins))
        df.insert(0, 'window', w)
        written.append(utils.write_csv(df, lab.report('histogram_w%d.csv' % w)))

    # accuracy table and confusion matrices
    rows, cms = [], []
    for w in windows:
        fit = utils.convert(lab.require(lab.gmm(w), 'sweep'))
        model = gmm.GmmModel.from_json(utils.convert(lab.gmm(w), 'string'))
        i_f, i_r = model.component(gmm.FLAT), model.component(gmm.ROUGH)
        rows.append(dict(window=w,
                         mean_flat=model.means[i_f], std_flat=model.stds[i_f],
                         mean_rough=model.means[i_r], std_rough=model.stds[i_r],
                         accuracy_pct=100.0 * fit['accuracy']
                         if fit['accuracy'] is not None else float('nan'),
                         recall_flat=fit['recall']['flat'],
                         recall_rough=fit['recall']['rough']))
        cm = cluster.confusion_frame(np.array(fit['confusion']))
        cm.insert(0, 'window', w)
        cms.append(cm)
    written.append(utils.write_csv(pd.DataFrame(rows), lab.report('accuracy.csv')))
    written.append(utils.write_csv(pd.concat(cms, ignore_index=True),
                                   lab.report('confusion.csv')))

    # pitch versus roll separability
    sep = []
    for column in telemetry.CHANNELS:
        try:
            results, _ = gmm.window_sweep(trajs.values(), windows, cfg.gmm,
                                          column=column,
                                          stride=int(cfg.telemetry.stride),
                                          seed=cfg.seed)
        except gmm.tlGMMError as e:
            logger.warning("No %s separability: %s" % (column, e))
            continue
        for r in results:
            f = r.features
            sep.append(dict(window=r.window, channel=column,
                            fisher_ratio=gmm.separability(
                                f.loc[f['area_label'] == 'flat', 'std'],
                                f.loc[f['area_label'] == 'rough', 'std']),
                            accuracy=r.evaluation.accuracy))
    written.append(utils.write_csv(
        pd.DataFrame(sep, columns=['window', 'channel', 'fisher_ratio', 'accuracy']),
        lab.report('feature_separation.csv')))
    return written


def evaluate_models(cfg, lab, trials=None):
    ''' Cross-evaluate the trained models and a random baseline.
    '''
    field = load_terrain(lab)
    models = []
    for stage in STAGES:
        if os.path.exists(lab.model(stage)):
            net, _, _ = pol.load_checkpoint(lab.model(stage))
            models.append((stage, pol.actor(net, deterministic=True)))
    if not models:
        raise tlArtifactError("No trained model in %s: run train first" %
                              lab.path('models'))
    models.append(('random', pol.random_actor(cfg.robot.max_wheel_rate)))
    n = int(trials) if trials is not None else int(cfg.report.eval_trials)
    df = evaluation.cross_evaluate(models, field,
                                   [field.flat_rect, field.rough_rect], n,
                                   cfg.seed, cfg.robot, cfg.task)
    utils.write_csv(df, lab.report('cross_evaluation.csv'))
    return df


def calibrate(cfg, lab, model='general'):
    ''' Rough-amplitude calibration with a trained model.
    '''
    net, _, _ = pol.load_checkpoint(resolve_model(lab, model))
    amp, table = evaluation.calibrate_amplitude(
        cfg, pol.actor(net, deterministic=cfg.telemetry.deterministic),
        window=int(cfg.report.calibration_window),
        band=tuple(cfg.report.calibration_band))
    utils.write_csv(table, lab.calibration)
    return amp, table


def _stage_artifacts(lab, stage):
    if stage == 'gen-terrain':
        return [lab.terrain]
    if stage in STAGES:
        return [lab.model(stage), lab.train_log(stage)]
    if stage == 'collect':
        return [lab.trajectory(a) for a in AREAS]
    if stage == 'sweep':
        return [lab.sweep]
    return [lab.report('accuracy.csv')]


def cmd_pipeline(cfg, stage=None, resume=False):
    ''' Run the whole pipeline (or one stage of it).

        gen-terrain -> train initial-flat -> train general -> collect
        flat and rough -> sweep -> report.  With `resume`, stages whose
        artifacts exist are skipped.  Returns the exit status 0.
    '''
    lab = TerrainLab(cfg.out)
    if stage is not None and stage not in PIPELINE_STAGES:
        raise tlConfigError("Unknown pipeline stage '%s', use one of %s" %
                            (stage, '|'.join(PIPELINE_STAGES)))
    todo = [stage] if stage is not None else list(PIPELINE_STAGES)
    for s in todo:
        if resume and all(os.path.exists(p) for p in _stage_artifacts(lab, s)):
            logger.info("Skipping %s: artifacts present" % s)
            continue
        logger.info("Running stage %s" % s)
        if s == 'gen-terrain':
            gen_terrain(cfg, lab)
        elif s in STAGES:
            train_stage(cfg, lab, s)
        elif s == 'collect':
            for area in AREAS:
                collect_area(cfg, lab, area)
        elif s == 'sweep':
            sweep(cfg, lab)
        else:
            report(cfg, lab)
    return 0


def cmd_report(cfg):
    ''' Build the report tables of cfg.out; returns the files written.
    '''
    return report(cfg, TerrainLab(cfg.out))


# =========================================================================
#  Task framework
# =========================================================================

class Task:
    '''
        Superclass to represent a Task
    '''
    def __init__(self, tlab, name, description):
        self.tl = tlab
        self.name = name
        self.tname = name
        self.description = description
        self.logger = None
        self.params = []
        self.cfg = None

    def run(self):
        pass

    def addOption(self, name, option):
        ''' Add an option to the Task.
        '''
        self.params.append(name)
        setattr(self, name, option)

        # Set the default value if provided.
        if option.default is not None:
            self.setOption(name, option.default)

    def addStdOptions(self):
        self.addOption("verbose",
            Option("verbose", "", "print verbose level log messages",
                    default=False))
        self.addOption("debug",
            Option("debug", "", "print debug log level messages",
                    default=False))
        self.addOption("warning",
            Option("warning", "", "print warning level log messages",
                    default=False))

    def addRunOptions(self):
        ''' Options shared by every stage: config file, seed and out dir.
        '''
        self.addOption("config",
            Option("config", "", "run configuration file", required=False))
        self.addOption("seed",
            Option("seed", "", "base random seed", required=False))
        self.addOption("out",
            Option("out", "", "output directory", required=False))

    def addLogger(self, logLevel, logFile):
        ''' Add a Logger to the Task: stderr plus `logFile`.
        '''
        logFormat = ("%(asctime)s tlab-" + tlab_version +
                     " %(name)s.%(funcName)s.%(lineno)d %(levelname)s %(message)s")
        self.logger = logging.getLogger('tlab')
        for h in list(self.logger.handlers):
            self.logger.removeHandler(h)
            h.close()
        self.logger.setLevel(logLevel)
        self.logger.propagate = False
        stream = logging.StreamHandler(sys.stderr)
        stream.setFormatter(logging.Formatter("%(levelname)s %(name)s %(message)s"))
        self.logger.addHandler(stream)
        if logFile is not None:
            handler = logging.FileHandler(os.path.abspath(logFile))
            handler.setFormatter(logging.Formatter(logFormat))
            self.logger.addHandler(handler)

    def setLogger(self, logLevel=None, logFile=None):
        ''' Set the logger to be used.
        '''
        if logLevel is None:
            logLevel = logging.ERROR
            if self.verbose.value:
                logLevel = logging.INFO
            if self.debug.value:
                logLevel = logging.DEBUG
            if self.warning.value:
                logLevel = logging.WARNING
        self.addLogger(logLevel, logFile)

    def setOption(self, name, value):
        ''' Set a Task option.
        '''
        if hasattr(self, name):
            opt = getattr(self, name)
            opt.value = value
        else:
            raise tlUsageError("Task '%s' has no option '%s'" % (self.name, name))

    def overrides(self):
        out = {}
        for key in ('seed', 'out', 'steps'):
            opt = getattr(self, key, None)
            if opt is not None and opt.value not in ('', None):
                out[key] = opt.value
        return out

    def prepare(self):
        ''' Read the configuration, create the output directory, start the
            log and record the effective configuration.
        '''
        path = self.config.value if self.config.value != '' else None
        self.cfg = read_config(path, self.overrides())
        self.tl.out = self.cfg.out
        if not os.path.isdir(self.cfg.out):
            os.makedirs(self.cfg.out)
        self.setLogger(logFile=self.tl.logfile)
        write_config(self.cfg, self.tl.config)
        return self.cfg

    def report(self, paths):
        ''' Print the artifacts written.
        '''
        for p in paths:
            print("wrote %s" % p)


################################################
#  Tasks
################################################

class Version(Task):
    '''
        Print the task version.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'version', 'Print task version')
        self.addStdOptions()

    def run(self):
        print("Task Version:  " + tlab_version)


class GenTerrain(Task):
    '''
        Generate the flat/rough terrain.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'gen-terrain', 'Generate the terrain')
        self.addRunOptions()
        self.addOption("roughness",
            Option("roughness", "", "roughness scale in [0,1]", required=False))
        self.addOption("amplitude",
            Option("amplitude", "", "rough amplitude (m)", required=False))
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        try:
            if self.roughness.value != '':
                cfg.terrain.roughness_scale = float(self.roughness.value)
            if self.amplitude.value != '':
                cfg.terrain.amplitude = float(self.amplitude.value)
        except ValueError as e:
            raise tlUsageError(str(e))
        cfg.validate()
        write_config(cfg, self.tl.config)
        gen_terrain(cfg, self.tl)
        self.report([self.tl.terrain])


class Train(Task):
    '''
        Train one PPO stage.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'train', 'Train a PPO stage')
        self.addRunOptions()
        self.addOption("stage",
            Option("stage", "", "initial-flat|general", required=True))
        self.addOption("steps",
            Option("steps", "", "total environment steps", required=False))
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        train_stage(cfg, self.tl, self.stage.value)
        self.report([self.tl.model(self.stage.value),
                     self.tl.train_log(self.stage.value),
                     self.tl.episode_log(self.stage.value)])


class Collect(Task):
    '''
        Collect orientation telemetry in one area.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'collect', 'Collect telemetry')
        self.addRunOptions()
        self.addOption("model",
            Option("model", "", "stage name or checkpoint path",
                   required=False, default='general'))
        self.addOption("area",
            Option("area", "", "flat|rough", required=True))
        self.addOption("steps",
            Option("steps", "", "steps to simulate", required=False))
        self.addOption("discard",
            Option("discard", "", "leading steps to drop", required=False))
        self.addStdOptions()

    def overrides(self):
        # --steps is the collection length here, not the PPO budget
        out = Task.overrides(self)
        out.pop('steps', None)
        return out

    def run(self):
        cfg = self.prepare()
        try:
            if self.steps.value != '':
                cfg.telemetry.n_steps = int(self.steps.value)
            if self.discard.value != '':
                cfg.telemetry.discard = int(self.discard.value)
        except ValueError as e:
            raise tlUsageError(str(e))
        cfg.validate()
        write_config(cfg, self.tl.config)
        collect_area(cfg, self.tl, self.area.value, self.model.value)
        self.report([self.tl.trajectory(self.area.value)])


class Sweep(Task):
    '''
        Fit the terrain GMM for every window size.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'sweep', 'Run the window sweep')
        self.addRunOptions()
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        _, table = sweep(cfg, self.tl)
        print(table.to_string(index=False))


class Report(Task):
    '''
        Write summary tables and plot data.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'report', 'Write the report tables')
        self.addRunOptions()
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        self.report(cmd_report(cfg))


class Evaluate(Task):
    '''
        Cross-evaluate trained models per area.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'evaluate', 'Cross-evaluate the models')
        self.addRunOptions()
        self.addOption("trials",
            Option("trials", "", "episodes per model and area", required=False))
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        try:
            trials = int(self.trials.value) if self.trials.value != '' else None
        except ValueError as e:
            raise tlUsageError(str(e))
        df = evaluate_models(cfg, self.tl, trials)
        print(df.to_string(index=False))


class Calibrate(Task):
    '''
        Calibrate the rough amplitude.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'calibrate', 'Calibrate the rough amplitude')
        self.addRunOptions()
        self.addOption("model",
            Option("model", "", "stage name or checkpoint path",
                   required=False, default='general'))
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        amp, table = calibrate(cfg, self.tl, self.model.value)
        print(table.to_string(index=False))
        print("amplitude = %r" % amp)


class Pipeline(Task):
    '''
        Run the end-to-end pipeline.
    '''
    def __init__(self, tlab):
        Task.__init__(self, tlab, 'pipeline', 'Run the whole pipeline')
        self.addRunOptions()
        self.addOption("steps",
            Option("steps", "", "PPO steps of each stage", required=False))
        self.addOption("stage",
            Option("stage", "", '|'.join(PIPELINE_STAGES), required=False))
        self.addOption("resume",
            Option("resume", "", "skip stages whose artifacts exist",
                   default=False))
        self.addStdOptions()

    def run(self):
        cfg = self.prepare()
        stage = self.stage.value if self.stage.value != '' else None
        cmd_pipeline(cfg, stage, bool(self.resume.value))


tasks = OrderedDict([
    ('gen-terrain', GenTerrain),
    ('train',       Train),
    ('collect',     Collect),
    ('sweep',       Sweep),
    ('report',      Report),
    ('evaluate',    Evaluate),
    ('calibrate',   Calibrate),
    ('pipeline',    Pipeline),
    ('version',     Version),
])


# =========================================================================
#  Command line
# =========================================================================

class TaskParser(optparse.OptionParser):
    '''Option parser that reports usage errors instead of exiting.
    '''
    def error(self, msg):
        raise tlUsageError(msg)


def usage():
    lines = ["Usage: tlab <task> [options]", "", "Tasks:"]
    for name, cls in tasks.items():
        lines.append("    %-12s %s" % (name, cls(TerrainLab()).description))
    return '\n'.join(lines)


def build_parser(task):
    parser = TaskParser(prog='tlab %s' % task.name,
                        description=task.description)
    for name in task.params:
        opt = getattr(task, name)
        if isinstance(opt.default, bool):
            parser.add_option("--%s" % name, dest=name, action="store_true",
                              default=opt.default, help=opt.description)
        else:
            parser.add_option("--%s" % name, dest=name, default=None,
                              help=opt.description)
    return parser


def main(argv=None):
    ''' Run a task; returns the exit status (0 ok, 1 validation, 2 failure).
    '''
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ('-h', '--help', 'help'):
        print(usage())
        return 0 if argv else 1

    name = argv[0]
    try:
        if name not in tasks:
            raise tlUsageError("Unknown task '%s'" % name)
        task = tasks[name](TerrainLab())
        opts, args = build_parser(task).parse_args(argv[1:])
        if args:
            raise tlUsageError("Unexpected arguments: %s" % ' '.join(args))
        for pname in task.params:
            value = getattr(opts, pname)
            if value is not None:
                task.setOption(pname, value)
            elif getattr(task, pname).required:
                raise tlUsageError("Task '%s' needs --%s" % (name, pname))
        task.run()
        return 0
    except (tlConfigError, tlArtifactError, tlUsageError) as e:
        print("Error: %s" % e, file=sys.stderr)
        logger.error(str(e))
        return 1
    except Exception as e:
        print("Error: %s: %s" % (e.__class__.__name__, e), file=sys.stderr)
        logger.exception("Task '%s' failed" % name)
        return 2


if __name__ == '__main__':
    sys.exit(main())
