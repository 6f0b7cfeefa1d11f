#!/usr/bin/env python
#
# EVALUATION -- Success-rate harness and rough-amplitude calibration.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Target-reaching evaluation of trained (or random) actors per area,
    the model x area cross-evaluation table, and the one-off calibration
    of the rough-terrain amplitude.

    Evaluation Interface
    --------------------

         row = evaluate_actor     (actor, field, area, n_trials, seed)
          df = cross_evaluate     (models, field, areas, n_trials, seed)
    amp, df  = calibrate_amplitude (config, actor, candidates, window, band)

Import via

.. code-block:: python

    from tlab import evaluation
'''

import logging

import numpy as np
import pandas as pd

from tlab.Util import tlConfigError, make_rng
from tlab import heightField
from tlab import robot as rb
from tlab import episode as ep
from tlab import telemetry


logger = logging.getLogger('tlab.evaluation')

CROSS_COLUMNS = ['model', 'area', 'success_rate', 'arrivals', 'trials',
                 'mean_time_s', 'std_time_s']
CALIBRATION_COLUMNS = ['amplitude', 'mean_std', 'in_band']

# Default candidates for the rough amplitude search, meters.
AMPLITUDES = (0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.10, 0.12, 0.15)


def evaluate_actor(actor, field, area, n_trials=50, seed=0, params=None,
                   constants=None):
    '''Run `n_trials` independent episodes of `actor` in `area`.

    Each trial respawns the robot uniformly inside the area and draws a
    fresh target; it runs until the episode ends.

    Returns
    -------
    dict with success_rate (percent), arrivals, trials, mean_time_s and
    std_time_s of the successful episodes (NaN without arrivals).
    '''
    p = params if params is not None else rb.RobotParams()
    env = ep.TargetReachEnv(field, area, p, constants, rng=make_rng(seed, 6),
                            name=area.label)
    act_rng = make_rng(seed, 7)
    times = []
    for trial in range(int(n_trials)):
        obs = env.restart()
        done = False
        while not done:
            obs, _, done, info = env.step(actor(obs, act_rng))
        summary = info['episode']
        if summary['status'] == ep.REACHED:
            times.append(summary['time_s'])

    arrivals = len(times)
    row = dict(success_rate=100.0 * arrivals / n_trials if n_trials else float('nan'),
               arrivals=arrivals, trials=int(n_trials),
               mean_time_s=float(np.mean(times)) if times else float('nan'),
               std_time_s=float(np.std(times)) if times else float('nan'))
    logger.info("%s area: %d/%d arrivals" % (area.label, arrivals, n_trials))
    return row


def cross_evaluate(models, field, areas, n_trials=50, seed=0, params=None,
                   constants=None):
    '''Evaluate every model in every area.

    Parameters
    ----------
    models : sequence of (name, actor)
        Include ('random', policy.random_actor()) for the baseline row.

    field : HeightField

    areas : sequence of AreaRect

    Returns
    -------
    DataFrame with CROSS_COLUMNS, one row per (model, area).
    '''
    rows = []
    for name, actor in models:
        for area in areas:
            row = evaluate_actor(actor, field, area, n_trials, seed, params,
                                 constants)
            rows.append(dict(row, model=name, area=area.label))
    return pd.DataFrame(rows, columns=CROSS_COLUMNS)


def calibrate_amplitude(config, actor, candidates=AMPLITUDES, window=70,
                        band=(0.05, 0.20)):
    '''Pick the rough-terrain amplitude from rough-area telemetry.

    For each candidate amplitude the terrain is regenerated, a rough-area
    trajectory collected with `actor`, and the mean window-`window`
    rolling std of sin(theta_x) measured.  Of the candidates whose mean
    lies in `band`, the one closest to the band centre is returned.

    Returns
    -------
    (amplitude, table)

    Raises
    ------
    tlConfigError
        When no candidate lands in the band.
    '''
    lo, hi = band
    rows = []
    for amp in candidates:
        tp = config.terrain.copy(amplitude=float(amp))
        field = heightField.generate_from(tp, config.seed)
        traj = telemetry.collect(actor, field.rough_rect, field,
                                 config.telemetry.n_steps,
                                 config.telemetry.discard, config.seed,
                                 config.robot, config.task)
        fs = telemetry.rolling_std(traj['sin_theta_x'].values, window)
        mean = float(np.mean(fs.values))
        rows.append(dict(amplitude=float(amp), mean_std=mean,
                         in_band=bool(lo <= mean <= hi)))
        logger.info("amplitude %.4f: mean rolling std %.5f" % (amp, mean))

    table = pd.DataFrame(rows, columns=CALIBRATION_COLUMNS)
    ok = table[table['in_band']]
    if ok.empty:
        raise tlConfigError("No candidate amplitude gives a window-%d mean "
                            "rolling std in [%g, %g]: %s" %
                            (window, lo, hi, list(table['mean_std'].round(5))))
    centre = 0.5 * (lo + hi)
    best = ok.iloc[int(np.argmin(np.abs(ok['mean_std'].values - centre)))]
    return float(best['amplitude']), table
