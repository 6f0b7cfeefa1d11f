#!/usr/bin/env python
#
# TELEMETRY -- Orientation time series and rolling-std features.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Runs a policy over one area while it performs the target-reaching
    task and records the pitch/roll signal at every step, then computes
    rolling population standard deviations of sin(theta_x) (or of the
    roll channel sin(theta_z)) for the terrain classifier.

    Telemetry Interface
    -------------------

         traj = collect      (actor, area, field, n_steps, discard, seed)
           fs = rolling_std  (series, window, stride)
           df = features     (traj, window, column, stride, label)
          std = RollingStd(window, exact_every).push(x)

Import via

.. code-block:: python

    from tlab import telemetry
'''

import logging
from collections import namedtuple, deque

import numpy as np
import pandas as pd

from tlab.Util import tlConfigError, ParamSet, make_rng, parse_bool
from tlab import heightField
from tlab import robot as rb
from tlab import episode as ep
from tlab import policy as pol


logger = logging.getLogger('tlab.telemetry')

TRAJECTORY_COLUMNS = ['step', 'time', 'x', 'z', 'theta_x', 'theta_z',
                      'theta_y', 'sin_theta_x', 'sin_theta_z', 'area']
FEATURE_COLUMNS = ['start_step', 'window', 'std', 'area_label']
CHANNELS = ('sin_theta_x', 'sin_theta_z')


class tlTelemetryError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class TelemetryParams(ParamSet):
    '''Collection settings ([telemetry] config section).
    '''
    FIELDS = (
        ('n_steps',       int,        500),
        ('discard',       int,        100),
        ('stride',        int,        1),
        ('deterministic', parse_bool, False),
    )

    def validate(self):
        if int(self.n_steps) < 0 or int(self.discard) < 0:
            raise tlConfigError("'n_steps' and 'discard' must be >= 0")
        if int(self.discard) > int(self.n_steps):
            raise tlConfigError("'discard' (%d) exceeds 'n_steps' (%d)" %
                                (self.discard, self.n_steps))
        if int(self.stride) < 1:
            raise tlConfigError("'stride' must be >= 1")
        return self


FeatureSeries = namedtuple('FeatureSeries', ['window', 'values', 'start_steps'])
FeatureSeries.__doc__ = '''Rolling std values; values[i] covers the input
rows [start_steps[i], start_steps[i] + window).'''


# --------------------------------------------------------------------
# COLLECT -- Record orientation while the robot does the task.
#
def collect(actor, area, field, n_steps=500, discard=100, seed=0, params=None,
            constants=None, deterministic=False):
    '''Collect an orientation trajectory inside `area`.

    Parameters
    ----------
    actor : callable or str
        actor(obs, rng) -> action, or the path of a policy checkpoint.

    area : AreaRect
        Spawn and target area; a robot that leaves it is respawned
        inside it and the event is logged.

    field : HeightField

    n_steps, discard : int
        Steps simulated and leading steps dropped.

    seed : int

    params, constants : RobotParams, TaskConstants

    deterministic : bool
        Use the policy mean when `actor` is a checkpoint path.

    Returns
    -------
    DataFrame with TRAJECTORY_COLUMNS, n_steps - discard rows.  `step`
    keeps the original step number (discard+1 .. n_steps).
    '''
    if discard > n_steps or discard < 0:
        raise tlTelemetryError("discard=%d must lie in [0, n_steps=%d]" %
                               (discard, n_steps))
    if isinstance(actor, str):
        net, _, _ = pol.load_checkpoint(actor)
        actor = pol.actor(net, deterministic=deterministic)

    p = params if params is not None else rb.RobotParams()
    env = ep.TargetReachEnv(field, area, p, constants, rng=make_rng(seed, 4),
                            name=area.label)
    act_rng = make_rng(seed, 5)
    obs = env.reset()

    rows = []
    for s in range(1, n_steps + 1):
        obs, _, _, _ = env.step(actor(obs, act_rng))
        if not heightField.in_rect(area, env.robot.x, env.robot.z):
            logger.info("Robot left the %s area at step %d (%.3f, %.3f); "
                        "respawning" % (area.label, s, env.robot.x, env.robot.z))
            obs = env.restart()
        if s <= discard:
            continue
        r = env.robot
        rows.append((s, s * p.dt, r.x, r.z, r.theta_x, r.theta_z, r.theta_y,
                     np.sin(r.theta_x), np.sin(r.theta_z),
                     heightField.area_of(field.flat_rect, field.rough_rect,
                                         r.x, r.z)))

    traj = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    logger.info("Collected %d rows in the %s area (%d respawns)" %
                (len(traj), area.label, env.n_respawns))
    return traj


# ###################################
#  Rolling standard deviation
# ###################################

class RollingStd(object):
    '''
         ROLLINGSTD -- Streaming population std over a sliding window.

         By default every push() recomputes the mean and the sum of
         squared deviations two-pass from the buffer, which keeps the
         result within rounding of rolling_std() at any offset or scale.
         With `exact_every` > 1 the pushes in between slide the window
         with a Welford-style replace update instead; its error grows
         with the sample scale relative to the window std.
    '''
    def __init__(self, window, exact_every=1):
        if int(window) < 2:
            raise tlTelemetryError("window must be >= 2, got %r" % window)
        if int(exact_every) < 1:
            raise tlTelemetryError("exact_every must be >= 1, got %r" % exact_every)
        self.window = int(window)
        self.exact_every = int(exact_every)
        self.buf = deque(maxlen=self.window)
        self.mean = 0.0
        self.m2 = 0.0
        self.since_exact = 0

    def _recompute(self):
        vals = np.fromiter(self.buf, dtype=np.float64, count=len(self.buf))
        self.mean = float(vals.mean())
        dev = vals - self.mean
        self.m2 = float(np.dot(dev, dev))
        self.since_exact = 0

    def push(self, x):
        ''' Add a sample; returns the window std once the window is full,
            else None.
        '''
        x = float(x)
        if len(self.buf) < self.window:
            self.buf.append(x)
            if len(self.buf) < self.window:
                return None
            self._recompute()
            return self.std()

        old = self.buf[0]
        self.buf.append(x)
        self.since_exact += 1
        if self.since_exact >= self.exact_every:
            self._recompute()
        else:
            new_mean = self.mean + (x - old) / self.window
            self.m2 += (x - old) * ((x - new_mean) + (old - self.mean))
            self.mean = new_mean
            if self.m2 < 0.0:
                self.m2 = 0.0
        return self.std()

    def std(self):
        return float(np.sqrt(self.m2 / self.window))


def stream_rolling_std(series, window, exact_every=1):
    '''Rolling std of `series` computed with RollingStd.'''
    rs = RollingStd(window, exact_every)
    out = [rs.push(v) for v in series]
    return np.array([v for v in out if v is not None])


def _check_series(series, window):
    vals = np.asarray(series, dtype=np.float64).ravel()
    if int(window) < 2:
        raise tlTelemetryError("window must be >= 2, got %r" % window)
    if vals.size < int(window):
        raise tlTelemetryError("Series of length %d is shorter than the window %d"
                               % (vals.size, window))
    return vals


# --------------------------------------------------------------------
# ROLLING_STD -- Population std over every window of a series.
#
def rolling_std(series, window, stride=1, start_steps=None):
    '''Population standard deviation over each contiguous window.

    Output index i covers input [i*stride, i*stride + window).  Each
    window is evaluated two-pass (mean first, then squared deviations).

    Parameters
    ----------
    series : array-like
    window : int, >= 2
    stride : int, >= 1
    start_steps : array-like or None
        Step number of every input row (defaults to 0..n-1); the first
        step of each window is carried into the result.

    Returns
    -------
    FeatureSeries
    '''
    vals = _check_series(series, window)
    if int(stride) < 1:
        raise tlTelemetryError("stride must be >= 1, got %r" % stride)
    windows = np.lib.stride_tricks.sliding_window_view(vals, int(window))
    windows = windows[::int(stride)]
    values = windows.std(axis=1)
    steps = np.arange(vals.size) if start_steps is None else np.asarray(start_steps)
    return FeatureSeries(int(window), values,
                         steps[:vals.size - int(window) + 1][::int(stride)])


def features(traj, window, column='sin_theta_x', stride=1, label=None):
    '''Rolling-std feature table of one trajectory channel.

    Returns a DataFrame with FEATURE_COLUMNS.  `label` defaults to the
    trajectory's ground-truth area label.
    '''
    if column not in CHANNELS:
        raise tlTelemetryError("Unknown channel '%s', use one of %s" %
                               (column, ', '.join(CHANNELS)))
    if len(traj) < int(window):
        raise tlTelemetryError("Trajectory of %d rows is shorter than the "
                               "window %d" % (len(traj), window))
    if label is None:
        label = traj['area'].iloc[0]
    fs = rolling_std(traj[column].values, window, stride, traj['step'].values)
    return pd.DataFrame({'start_step': fs.start_steps,
                         'window': fs.window,
                         'std': fs.values,
                         'area_label': label}, columns=FEATURE_COLUMNS)
