#!/usr/bin/env python
#
# ROBOT -- Kinematic two-wheeled differential-drive rover on a heightfield.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Kinematic differential-drive robot.  Each step integrates the planar
    unicycle model from the two wheel commands and then settles the body
    onto the terrain with four contact probes, which yields the pitch
    (theta_x) and roll (theta_z) signal used downstream.

    Axes follow a left-handed frame with Y up: the robot X axis runs
    through the wheel centres from left to right, the robot Z axis runs
    fore-aft.  The heading vector on the X-Z plane is (-sin yaw, cos yaw)
    and the right axis is (cos yaw, sin yaw), so yaw grows when the right
    wheel turns faster.

    Robot Interface
    ---------------

        state = spawn  (x, z, yaw, field, params)
        state = step   (state, action, field, params)
    y, tx, tz = settle (x, z, yaw, field, params)
        feats = orientation_features (state)

Import via

.. code-block:: python

    from tlab import robot
'''

import math
import logging
from collections import namedtuple

import numpy as np

from tlab.Util import ParamSet, check_positive
from tlab.heightField import tlExtentError


logger = logging.getLogger('tlab.robot')


class tlRobotError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


# ###################################
#  Robot parameters and state
# ###################################

class RobotParams(ParamSet):
    '''Robot geometry and actuation, read from the [robot] config section.
    '''
    FIELDS = (
        ('wheel_radius',   float, 0.03),    # m
        ('track_width',    float, 0.12),    # m, wheel contact separation
        ('body_length',    float, 0.10),    # m, fore-aft contact separation
        ('max_wheel_rate', float, 3.0),     # action units
        ('speed_per_unit', float, 0.1),     # (m/s) per action unit
        ('dt',             float, 0.1),     # s per step
    )

    def validate(self):
        for name in self.names():
            check_positive(name, getattr(self, name))
        return self

    @property
    def reach(self):
        ''' Largest planar distance from the body centre to a probe.
        '''
        return 0.5 * max(self.track_width, self.body_length)


RobotState = namedtuple('RobotState', ['x', 'y', 'z',
                                       'theta_x', 'theta_y', 'theta_z',
                                       'a_left', 'a_right', 'boundary_hit'])
RobotState.__new__.__defaults__ = (0.0, 0.0, False)
RobotState.__doc__ = '''Robot pose: position (m), Euler angles (rad) as
pitch theta_x, yaw theta_y, roll theta_z, the last clamped wheel command
and whether the last step was held at the terrain boundary.'''


def wrap_angle(a):
    '''Wrap an angle to [-pi, pi).'''
    r = float(np.mod(a + math.pi, 2.0 * math.pi)) - math.pi
    # the modulo can round up to 2*pi
    return -math.pi if r >= math.pi else r


def heading(yaw):
    '''Unit fore (Z) and right (X) axes of the robot on the X-Z plane.'''
    s, c = math.sin(yaw), math.cos(yaw)
    return (-s, c), (c, s)


# --------------------------------------------------------------------
# SETTLE -- Rest the body on the terrain from four contact probes.
#
def settle(x, z, yaw, field, params):
    '''Settle the body at planar position (x, z) with heading `yaw`.

    Probes sit at the left/right wheels (+-track_width/2 along robot X)
    and fore/aft (+-body_length/2 along robot Z).

    Returns
    -------
    (y, theta_x, theta_z) : tuple of float
        y is the mean probed height, theta_x = atan((h_fore - h_aft) /
        body_length), theta_z = atan((h_left - h_right) / track_width).

    Raises
    ------
    tlExtentError
        When a probe falls outside the terrain.
    '''
    (fx, fz), (rx, rz) = heading(yaw)
    hw = 0.5 * params.track_width
    hl = 0.5 * params.body_length

    h_left = field.height_at(x - rx * hw, z - rz * hw)
    h_right = field.height_at(x + rx * hw, z + rz * hw)
    h_fore = field.height_at(x + fx * hl, z + fz * hl)
    h_aft = field.height_at(x - fx * hl, z - fz * hl)

    y = (h_left + h_right + h_fore + h_aft) / 4.0
    theta_x = math.atan((h_fore - h_aft) / params.body_length)
    theta_z = math.atan((h_left - h_right) / params.track_width)
    return y, theta_x, theta_z


def spawn(x, z, yaw, field, params):
    '''Return a settled RobotState at (x, z, yaw) with a zero command.'''
    yaw = wrap_angle(yaw)
    y, tx, tz = settle(x, z, yaw, field, params)
    return RobotState(x, y, z, tx, yaw, tz, 0.0, 0.0, False)


def clamp_action(action, limit=3.0):
    '''Clamp a wheel command pair to [-limit, limit].'''
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.size != 2:
        raise tlRobotError("Action must have 2 components, got %d" % a.size)
    if not np.all(np.isfinite(a)):
        raise tlRobotError("Action must be finite, got %s" % (a,))
    return np.clip(a, -limit, limit)


# --------------------------------------------------------------------
# STEP -- Advance one control step.
#
def step(state, action, field, params):
    '''Advance the robot by one step of `params.dt` seconds.

    Parameters
    ----------
    state : RobotState
        Current state.

    action : sequence of 2 floats
        (A_left, A_right) wheel commands, clamped to +-max_wheel_rate.

    field : HeightField
        Terrain to settle on.

    params : RobotParams
        Geometry and actuation.

    Returns
    -------
    state : RobotState
        Forward speed v = speed_per_unit*(A_left+A_right)/2 and yaw rate
        w = speed_per_unit*(A_right-A_left)/track_width are integrated
        with the mid-step heading, then the pose is settled.  A step that
        would take a probe off the terrain is held at the boundary and
        flagged with boundary_hit=True.
    '''
    a_left, a_right = clamp_action(action, params.max_wheel_rate)
    v = params.speed_per_unit * (a_left + a_right) / 2.0
    w = params.speed_per_unit * (a_right - a_left) / params.track_width
    dt = params.dt

    mid = state.theta_y + 0.5 * w * dt
    (fx, fz), _ = heading(mid)
    x = state.x + v * dt * fx
    z = state.z + v * dt * fz
    yaw = state.theta_y + w * dt
    if not -math.pi <= yaw < math.pi:
        yaw = wrap_angle(yaw)

    hit = False
    reach = params.reach
    if not field.contains(x, z, margin=reach):
        x_min, x_max, z_min, z_max = field.extent
        x = min(max(x, x_min + reach), x_max - reach)
        z = min(max(z, z_min + reach), z_max - reach)
        hit = True
        logger.debug("Robot held at terrain boundary (%.3f, %.3f)" % (x, z))

    try:
        y, tx, tz = settle(x, z, yaw, field, params)
    except tlExtentError:
        raise tlRobotError("Terrain of extent %s is too small for the robot"
                           % (field.extent,))
    return RobotState(x, y, z, tx, yaw, tz, float(a_left), float(a_right), hit)


# --------------------------------------------------------------------
# ORIENTATION_FEATURES -- Trig encoding of the Euler angles.
#
def orientation_features(state):
    '''Return (cos tx, sin tx, cos ty, sin ty, cos tz, sin tz).'''
    tx, ty, tz = state.theta_x, state.theta_y, state.theta_z
    return np.array([math.cos(tx), math.sin(tx),
                     math.cos(ty), math.sin(ty),
                     math.cos(tz), math.sin(tz)])
