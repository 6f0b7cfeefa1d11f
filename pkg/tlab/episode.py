#!/usr/bin/env python
#
# EPISODE -- Target-reaching task: targets, termination and rewards.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    The target-reaching task the rover is trained on.

    A target is drawn uniformly from the annulus delta < r <= 5*delta
    around the robot.  The episode ends as

        reached   -- robot-target distance < delta
        drifted   -- distance > PED = (ID + 2*delta) - k*delta
        timeout   -- step_count >= MES = 300 + 200*ID

    where ID is the initial X-Z distance and k counts the delta-approaches
    made so far.  Rewards are a one-off progress payment each time a
    delta-circle around the target is first crossed, plus on arrival
    BR + OR - TP with BR = 100 + 10*RD, OR = 50*MO and TP = steps/MES.
    The robot pose is not reset between episodes.

    Episode Interface
    -----------------

     target, ID = sample_target      (robot_pos, rng, bounds, constants, field)
            mes = max_episode_steps  (ID, constants)
            ped = penalty_distance   (ID, k, constants)
          state = update_k           (state, current_distance, constants)
             br = base_reward        (ID, constants)
            rew = final_reward       (state, mes, constants)
     rew, state = progress_reward    (state, current_position, constants)
            obs = build_observation  (robot_state, target)
        (state, robot_state, reward, done, info) =
                  step_episode       (state, robot_state, action, field,
                                      params, constants, rng, bounds)

            env = TargetReachEnv     (field, area, params, constants, seed)

Import via

.. code-block:: python

    from tlab import episode
'''

import math
import logging
from collections import namedtuple

import numpy as np

from tlab.Util import tlConfigError, ParamSet
from tlab.Util import check_positive, check_choice, make_rng
from tlab import heightField
from tlab import robot as rb


logger = logging.getLogger('tlab.episode')

RUNNING = 'running'
REACHED = 'reached'
TIMEOUT = 'timeout'
DRIFTED = 'drifted'

FROM_START = 'from_start'
TOWARD_TARGET = 'toward_target'

# Tolerance used when counting delta multiples, so 0.3/0.1 counts as 3.
COUNT_EPS = 1e-9


class tlEpisodeError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class tlTargetError(tlEpisodeError):
    '''No admissible target around the robot inside the area bounds.
    '''
    pass


# ###################################
#  Task constants
# ###################################

class TaskConstants(ParamSet):
    '''Task geometry and reward coefficients ([task] config section).
    '''
    FIELDS = (
        ('delta',             float, 0.1),     # m
        ('inner_factor',      float, 1.0),     # annulus inner radius / delta
        ('outer_factor',      float, 5.0),     # annulus outer radius / delta
        ('reach_factor',      float, 1.0),     # reach radius / delta
        ('mes_base',          float, 300.0),
        ('mes_slope',         float, 200.0),   # steps per meter of ID
        ('ped_margin',        float, 2.0),     # in units of delta
        ('br_base',           float, 100.0),
        ('br_scale',          float, 10.0),
        ('rd_total',          float, 15.0),
        ('n_cap',             int,   5),
        ('or_scale',          float, 50.0),
        ('progress_scale',    float, 100.0),
        ('progress_metric',   str,   FROM_START),
        ('max_target_tries',  int,   64),
        ('max_spawn_retries', int,   20),
    )

    def validate(self):
        check_positive('delta', self.delta)
        check_positive('inner_factor', self.inner_factor)
        if self.outer_factor <= self.inner_factor:
            raise tlConfigError("'outer_factor' must exceed 'inner_factor'")
        check_positive('reach_factor', self.reach_factor)
        check_positive('mes_base', self.mes_base)
        check_choice('progress_metric', self.progress_metric,
                     (FROM_START, TOWARD_TARGET))
        for name in ('n_cap', 'max_target_tries', 'max_spawn_retries'):
            if int(getattr(self, name)) < 1:
                raise tlConfigError("'%s' must be >= 1" % name)
        return self

    @property
    def inner_radius(self):
        return self.inner_factor * self.delta

    @property
    def outer_radius(self):
        return self.outer_factor * self.delta

    @property
    def reach_radius(self):
        return self.reach_factor * self.delta


# ###################################
#  Episode state and observation
# ###################################

EpisodeState = namedtuple('EpisodeState', [
    'episode_id',
    'initial_x', 'initial_z',       # m, robot position at episode start
    'target',                       # (x, y, z) m
    'initial_distance',             # ID, m
    'mes',                          # max episode steps
    'step_count',
    'k',                            # PED update count
    'min_distance',                 # closest robot-target distance so far
    'ledger',                       # frozenset of delta-circles already paid
    'mo_accumulator',               # running sum of cos(theta_x)
    'status',
    'total_reward',
])

Observation = namedtuple('Observation', ['t_x', 't_y', 't_z', 'd', 'features'])
Observation.__doc__ = '''Target in the robot frame (m), planar distance d
(m) and the 6 orientation features.'''

OBS_DIM = 10
ACT_DIM = 2


def observation_vector(obs):
    '''Flatten an Observation to the 10-vector fed to the policy.'''
    return np.concatenate(([obs.t_x, obs.t_y, obs.t_z, obs.d], obs.features))


def _count(x, delta):
    '''floor(x/delta), tolerant of float round-off.'''
    return int(math.floor(x / delta + COUNT_EPS))


def planar_distance(ax, az, bx, bz):
    return math.hypot(bx - ax, bz - az)


# --------------------------------------------------------------------
# SAMPLE_TARGET -- Uniform target in the annulus, inside the bounds.
#
def sample_target(robot_pos, rng, bounds, constants, field=None):
    '''Draw a target uniformly over the annulus around the robot.

    Parameters
    ----------
    robot_pos : (x, z)
        Planar robot position in meters.

    rng : numpy.random.Generator
        Random stream.

    bounds : AreaRect
        Targets are restricted to this rectangle.

    constants : TaskConstants

    field : HeightField or None
        If given, the target height is the terrain height there,
        otherwise 0.

    Returns
    -------
    (target, ID) : ((x, y, z), float)
        ID is the X-Z distance from the robot, inner < ID <= outer.

    Raises
    ------
    tlTargetError
        When `max_target_tries` draws all fall outside the bounds.
    '''
    x0, z0 = robot_pos
    r_in2 = constants.inner_radius ** 2
    r_out2 = constants.outer_radius ** 2
    for _ in range(int(constants.max_target_tries)):
        # 1 - U lies in (0, 1], so r lies in (inner, outer].
        u = 1.0 - rng.random()
        r = math.sqrt(r_in2 + u * (r_out2 - r_in2))
        phi = rng.uniform(-math.pi, math.pi)
        tx = x0 + r * math.cos(phi)
        tz = z0 + r * math.sin(phi)
        if heightField.in_rect(bounds, tx, tz):
            ty = field.height_at(tx, tz) if field is not None else 0.0
            return (tx, ty, tz), planar_distance(x0, z0, tx, tz)
    raise tlTargetError("No target inside %s around (%.3f, %.3f) after %d draws"
                        % (tuple(bounds[:4]), x0, z0, constants.max_target_tries))


# --------------------------------------------------------------------
# Closed-form task quantities.
#
def max_episode_steps(initial_distance, constants=None):
    '''MES = 300 + 200*ID, rounded half-up to an integer.'''
    c = constants if constants is not None else TaskConstants()
    return int(math.floor(c.mes_base + c.mes_slope * initial_distance + 0.5))


def penalty_distance(initial_distance, k, constants=None):
    '''PED = (ID + 2*delta) - k*delta.'''
    c = constants if constants is not None else TaskConstants()
    if k < 0:
        raise tlEpisodeError("k must be >= 0, got %r" % k)
    return (initial_distance + c.ped_margin * c.delta) - k * c.delta


def base_reward(initial_distance, constants=None):
    '''BR = 100 + 10*RD with RD = 15 - N(N+1)/2, N = min(floor(ID/delta), 5).'''
    c = constants if constants is not None else TaskConstants()
    n = min(_count(initial_distance, c.delta), int(c.n_cap))
    rd = c.rd_total - n * (n + 1) / 2.0
    return c.br_base + c.br_scale * rd


def mean_orientation(state):
    '''MO, the episode average of cos(theta_x).  1.0 before any step.'''
    if state.step_count == 0:
        return 1.0
    return state.mo_accumulator / state.step_count


def final_reward(state, mes, constants=None):
    '''FinalReward = BR + OR - TP for a reached episode.

    OR = 50*MO and TP = step_count/mes.  Calling this for an episode
    that did not reach its target is a contract violation.
    '''
    c = constants if constants is not None else TaskConstants()
    if state.status != REACHED:
        raise tlEpisodeError("final_reward() needs a reached episode, "
                             "status is '%s'" % state.status)
    br = base_reward(state.initial_distance, c)
    orient = c.or_scale * mean_orientation(state)
    tp = float(state.step_count) / float(mes)
    return br + orient - tp


def update_k(state, current_distance, constants=None):
    '''Update the PED counter from the closest distance seen so far.

    k = floor((ID - min_distance)/delta); it never decreases.
    '''
    c = constants if constants is not None else TaskConstants()
    dmin = min(state.min_distance, current_distance)
    k = max(state.k, _count(state.initial_distance - dmin, c.delta))
    return state._replace(min_distance=dmin, k=k)


def _circles_inside(initial_distance, delta):
    '''Index of the largest delta-circle strictly inside ID.'''
    return int(math.ceil(initial_distance / delta - COUNT_EPS)) - 1


def progress_reward(state, current_position, constants=None):
    '''One-off payment for each newly crossed delta-circle around the target.

    The circles have radii j*delta (j >= 1, j*delta < ID).  Each pays
    100*PD once, where PD is the X-Z distance from the initial position
    to the current position truncated to one decimal ('from_start'), or
    the truncated approach ID - distance ('toward_target').

    Returns
    -------
    (reward, state) : (float, EpisodeState)
        reward is 0 when no new circle was crossed; the returned state
        has the paid circles added to its ledger.
    '''
    c = constants if constants is not None else TaskConstants()
    x, z = current_position
    dist = planar_distance(x, z, state.target[0], state.target[2])
    j_max = _circles_inside(state.initial_distance, c.delta)
    j_min = max(1, int(math.ceil(dist / c.delta - COUNT_EPS)))
    new = [j for j in range(j_min, j_max + 1) if j not in state.ledger]
    if not new:
        return 0.0, state

    if c.progress_metric == TOWARD_TARGET:
        moved = max(state.initial_distance - dist, 0.0)
    else:
        moved = planar_distance(state.initial_x, state.initial_z, x, z)
    pd = math.floor(moved * 10.0 + COUNT_EPS) / 10.0
    reward = c.progress_scale * pd * len(new)
    return reward, state._replace(ledger=state.ledger.union(new))


# --------------------------------------------------------------------
# BUILD_OBSERVATION -- Target in the yaw-rotated robot frame.
#
def build_observation(robot_state, target):
    '''Build the 10-dim observation.

    The planar offset to the target is rotated into the robot frame
    (t_x along the wheel axis, t_z fore-aft); t_y is the target height
    minus the robot height.  d = sqrt(t_x**2 + t_z**2).
    '''
    dx = target[0] - robot_state.x
    dz = target[2] - robot_state.z
    (fx, fz), (rx, rz) = rb.heading(robot_state.theta_y)
    t_x = dx * rx + dz * rz
    t_z = dx * fx + dz * fz
    t_y = target[1] - robot_state.y
    return Observation(t_x, t_y, t_z, math.hypot(t_x, t_z),
                       rb.orientation_features(robot_state))


# --------------------------------------------------------------------
# NEW_EPISODE -- Fresh episode state for a target.
#
def new_episode(robot_state, target, initial_distance, constants=None,
                episode_id=0):
    c = constants if constants is not None else TaskConstants()
    return EpisodeState(episode_id=episode_id,
                        initial_x=robot_state.x, initial_z=robot_state.z,
                        target=tuple(target), initial_distance=initial_distance,
                        mes=max_episode_steps(initial_distance, c),
                        step_count=0, k=0, min_distance=initial_distance,
                        ledger=frozenset(), mo_accumulator=0.0,
                        status=RUNNING, total_reward=0.0)


def summarize(state, dt=0.1):
    '''Per-episode summary row for the episode log.'''
    return dict(episode=state.episode_id,
                initial_distance=state.initial_distance,
                steps=state.step_count,
                status=state.status,
                total_reward=state.total_reward,
                mo=mean_orientation(state),
                time_s=state.step_count * dt)


# --------------------------------------------------------------------
# STEP_EPISODE -- One task step: move, reward, terminate.
#
def step_episode(state, robot_state, action, field, params=None,
                 constants=None, rng=None, bounds=None):
    '''Advance the task by one robot step.

    Parameters
    ----------
    state : EpisodeState
        A running episode.

    robot_state : RobotState

    action : (A_left, A_right)

    field : HeightField

    params : RobotParams

    constants : TaskConstants

    rng, bounds : numpy.random.Generator, AreaRect, optional
        When both are given and the episode ends, a new target is sampled
        around the current pose (the pose is kept) and the returned state
        is the new running episode.

    Returns
    -------
    (state, robot_state, reward, done, info)
        info['episode'] holds the summary of an episode that just ended.
    '''
    p = params if params is not None else rb.RobotParams()
    c = constants if constants is not None else TaskConstants()
    if state.status != RUNNING:
        raise tlEpisodeError("step_episode() on a finished episode (%s)"
                             % state.status)

    robot_state = rb.step(robot_state, action, field, p)
    state = state._replace(step_count=state.step_count + 1,
                           mo_accumulator=state.mo_accumulator +
                           math.cos(robot_state.theta_x))
    dist = planar_distance(robot_state.x, robot_state.z,
                           state.target[0], state.target[2])
    state = update_k(state, dist, c)
    reward, state = progress_reward(state, (robot_state.x, robot_state.z), c)

    if dist < c.reach_radius:
        state = state._replace(status=REACHED)
        reward += final_reward(state, state.mes, c)
    elif dist > penalty_distance(state.initial_distance, state.k, c):
        state = state._replace(status=DRIFTED)
    elif state.step_count >= state.mes:
        state = state._replace(status=TIMEOUT)

    state = state._replace(total_reward=state.total_reward + reward)
    done = state.status != RUNNING
    info = {'boundary_hit': robot_state.boundary_hit}
    if done:
        info['episode'] = summarize(state, p.dt)
        if rng is not None and bounds is not None:
            target, dist0 = sample_target((robot_state.x, robot_state.z), rng,
                                          bounds, c, field)
            state = new_episode(robot_state, target, dist0, c,
                                state.episode_id + 1)
    return state, robot_state, reward, done, info


# ###################################
#  Gym-style environment
# ###################################

class TargetReachEnv(object):
    '''
         TARGETREACHENV -- The target-reaching task in one area.

         reset() spawns the robot inside `area` and draws a target;
         step(action) returns (obs, reward, done, info).  After an
         episode ends the next target is drawn around the current pose.
         The robot is only respawned when no target fits inside the area
         around it.
    '''
    def __init__(self, field, area, params=None, constants=None, seed=0,
                 rng=None, name=None):
        self.field = field
        self.area = area
        self.params = params if params is not None else rb.RobotParams()
        self.constants = constants if constants is not None else TaskConstants()
        self.rng = rng if rng is not None else make_rng(seed)
        self.name = name if name is not None else area.label
        self.robot = None
        self.state = None
        self.episodes = []
        self.n_respawns = 0

    def respawn(self):
        ''' Place the robot uniformly inside the area with a random heading.
        '''
        m = self.params.reach
        a = self.area
        if a.x_max - a.x_min <= 2 * m or a.z_max - a.z_min <= 2 * m:
            raise tlConfigError("Area %s is too small for the robot" % (tuple(a[:4]),))
        x = self.rng.uniform(a.x_min + m, a.x_max - m)
        z = self.rng.uniform(a.z_min + m, a.z_max - m)
        yaw = self.rng.uniform(-math.pi, math.pi)
        self.robot = rb.spawn(x, z, yaw, self.field, self.params)
        return self.robot

    def _start_episode(self, episode_id, respawn=False):
        retries = int(self.constants.max_spawn_retries)
        for attempt in range(retries + 1):
            if respawn or self.robot is None:
                self.respawn()
            try:
                target, dist = sample_target((self.robot.x, self.robot.z),
                                             self.rng, self.area,
                                             self.constants, self.field)
            except tlTargetError as e:
                logger.info("%s: %s; respawning (attempt %d)" %
                            (self.name, e, attempt + 1))
                self.n_respawns += 1
                respawn = True
                continue
            self.state = new_episode(self.robot, target, dist, self.constants,
                                     episode_id)
            return self.state
        raise tlConfigError("No admissible target in area %s after %d respawns"
                            % (tuple(self.area[:4]), retries))

    def reset(self):
        ''' Spawn the robot, draw a target and return the observation.
        '''
        self.episodes = []
        self.robot = None
        self._start_episode(0, respawn=True)
        return self.observe()

    def restart(self):
        ''' Respawn the robot and start a new episode, keeping the log.
        '''
        next_id = self.state.episode_id + 1 if self.state is not None else 0
        self._start_episode(next_id, respawn=True)
        return self.observe()

    def observe(self):
        return observation_vector(build_observation(self.robot, self.state.target))

    def step(self, action):
        ''' Apply a wheel command; returns (obs, reward, done, info).
        '''
        if self.state is None:
            raise tlEpisodeError("step() before reset()")
        state, self.robot, reward, done, info = step_episode(
            self.state, self.robot, action, self.field, self.params,
            self.constants)
        if done:
            self.episodes.append(info['episode'])
            self._start_episode(state.episode_id + 1)
        else:
            self.state = state
        return self.observe(), reward, done, info

    def episode_log(self):
        ''' Finished-episode summaries as a list of dicts.
        '''
        return [dict(e, env=self.name) for e in self.episodes]
