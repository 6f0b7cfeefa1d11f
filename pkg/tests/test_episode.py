"""
    test_episode.py - test functionality in tlab/episode.py
    To run the test everything simply do:
        pytest tests/test_episode.py
  To test individual test methods verbose (-v):
    pytest tests/test_episode.py::test_max_episode_steps -v
"""

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd
import os
import sys
import math
import unittest
import pytest
import numpy as np
from scipy import stats

# position the script relative to the code
ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
sys.path.append(os.path.join(ROOT_PATH, '..'))
from tlab import episode as ep
from tlab import robot as rb
from tlab import heightField as hf
from tlab.Util import tlConfigError


def flat_field():
    cell = 0.05
    xs = -3.0 + np.arange(81) * cell
    zs = -1.5 + np.arange(61) * cell
    return hf.HeightField(np.zeros((zs.size, xs.size)), cell, (-3.0, -1.5),
                          0.0, 0)


FIELD = flat_field()
PARAMS = rb.RobotParams()
CONST = ep.TaskConstants()
WIDE = hf.AreaRect(-100.0, 100.0, -100.0, 100.0, hf.FLAT)


def episode_at(target, x=-1.0, z=0.0, yaw=0.0):
    robot = rb.spawn(x, z, yaw, FIELD, PARAMS)
    dist = ep.planar_distance(x, z, target[0], target[2])
    return ep.new_episode(robot, target, dist, CONST), robot


@pytest.mark.parametrize(
    "distance, expected",
    [(0.1, 320), (0.5, 400), (0.25, 350), (0.3, 360)]
)
def test_max_episode_steps(distance, expected):
    assert ep.max_episode_steps(distance) == expected


@pytest.mark.parametrize(
    "distance, k, expected",
    [(0.3, 0, 0.5), (0.3, 2, 0.3), (0.1, 0, 0.3), (0.5, 5, 0.2)]
)
def test_penalty_distance(distance, k, expected):
    assert abs(ep.penalty_distance(distance, k) - expected) < 1e-9


def test_penalty_distance_negative_k():
    with pytest.raises(ep.tlEpisodeError):
        ep.penalty_distance(0.3, -1)


@pytest.mark.parametrize(
    "distance, expected",
    [(0.5, 100.0), (0.1, 240.0), (0.3, 190.0), (0.45, 150.0), (0.05, 250.0)]
)
def test_base_reward(distance, expected):
    assert abs(ep.base_reward(distance) - expected) < 1e-9


class TestFinalReward(unittest.TestCase):

    def setUp(self):
        state, _ = episode_at((-0.9, 0.0, 0.0))
        self.state = state._replace(status=ep.REACHED)

    def test_level_robot(self):
        """MO=1, ID=0.1, reached in 160 of 320 steps gives 289.5"""
        s = self.state._replace(step_count=160, mo_accumulator=160.0)
        self.assertAlmostEqual(s.initial_distance, 0.1, places=12)
        self.assertAlmostEqual(ep.final_reward(s, 320), 289.5, delta=1e-9)

    def test_full_time_penalty(self):
        s = self.state._replace(step_count=320, mo_accumulator=320.0)
        self.assertAlmostEqual(ep.final_reward(s, 320), 240.0 + 50.0 - 1.0,
                               delta=1e-9)

    def test_zero_orientation(self):
        s = self.state._replace(step_count=32, mo_accumulator=0.0)
        self.assertAlmostEqual(ep.final_reward(s, 320), 240.0 - 0.1, delta=1e-9)

    def test_not_reached(self):
        s = self.state._replace(status=ep.RUNNING, step_count=10)
        with self.assertRaises(ep.tlEpisodeError):
            ep.final_reward(s, 320)

    def test_mean_orientation_before_steps(self):
        self.assertEqual(ep.mean_orientation(self.state), 1.0)


class TestUpdateK(unittest.TestCase):

    def setUp(self):
        self.state, _ = episode_at((-0.5, 0.0, 0.0))

    def test_threshold(self):
        s = ep.update_k(self.state, 0.31)
        self.assertEqual(s.k, 1)
        self.assertEqual(s.min_distance, 0.31)

    def test_never_closer(self):
        s = ep.update_k(self.state, 0.55)
        self.assertEqual(s.k, 0)

    def test_monotone(self):
        s = ep.update_k(self.state, 0.2)
        self.assertEqual(s.k, 3)
        s = ep.update_k(s, 0.45)
        self.assertEqual(s.k, 3)
        self.assertEqual(s.min_distance, 0.2)


class TestProgressReward(unittest.TestCase):

    def setUp(self):
        # start at (-1, 0), target 0.5 m away along +X
        self.state, _ = episode_at((-0.5, 0.0, 0.0))

    def test_truncated_distance(self):
        """Crossing one new circle at 0.37 m from the start pays 100*0.3"""
        s = self.state._replace(ledger=frozenset([3, 4]))
        reward, s = ep.progress_reward(s, (-0.63, 0.0))
        self.assertAlmostEqual(reward, 30.0, places=9)
        self.assertEqual(s.ledger, frozenset([2, 3, 4]))

    def test_paid_once(self):
        s = self.state._replace(ledger=frozenset([3, 4]))
        _, s = ep.progress_reward(s, (-0.63, 0.0))
        reward, s2 = ep.progress_reward(s, (-0.63, 0.0))
        self.assertEqual(reward, 0.0)
        self.assertEqual(s2.ledger, s.ledger)

    def test_no_crossing(self):
        reward, s = ep.progress_reward(self.state, (-0.98, 0.0))
        self.assertEqual(reward, 0.0)
        self.assertEqual(s.ledger, frozenset())

    def test_several_circles_in_one_step(self):
        reward, s = ep.progress_reward(self.state, (-0.63, 0.0))
        self.assertAlmostEqual(reward, 3 * 30.0, places=9)
        self.assertEqual(s.ledger, frozenset([2, 3, 4]))

    def test_toward_target_metric(self):
        c = CONST.copy(progress_metric=ep.TOWARD_TARGET)
        s = self.state._replace(ledger=frozenset([4]))
        # off-axis: 0.36 m from the start but only 0.22 m closer
        reward, _ = ep.progress_reward(s, (-0.7, 0.2), c)
        self.assertAlmostEqual(reward, 20.0, places=9)
        reward, _ = ep.progress_reward(s, (-0.7, 0.2))
        self.assertAlmostEqual(reward, 30.0, places=9)


class TestObservation(unittest.TestCase):

    def test_target_ahead(self):
        robot = rb.RobotState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        obs = ep.build_observation(robot, (0.0, 0.2, 1.0))
        self.assertAlmostEqual(obs.t_x, 0.0, places=12)
        self.assertAlmostEqual(obs.t_y, 0.2, places=12)
        self.assertAlmostEqual(obs.t_z, 1.0, places=12)
        self.assertAlmostEqual(obs.d, 1.0, places=12)

    def test_target_right(self):
        robot = rb.RobotState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        obs = ep.build_observation(robot, (1.0, 0.0, 0.0))
        self.assertAlmostEqual(obs.t_x, 1.0, places=12)
        self.assertAlmostEqual(obs.t_z, 0.0, places=12)

    def test_turned_around(self):
        robot = rb.RobotState(0.5, 0.1, -0.5, 0.0, math.pi, 0.0)
        a = ep.build_observation(robot._replace(theta_y=0.0), (0.8, 0.0, 0.1))
        b = ep.build_observation(robot, (0.8, 0.0, 0.1))
        self.assertAlmostEqual(b.t_x, -a.t_x, places=12)
        self.assertAlmostEqual(b.t_z, -a.t_z, places=12)
        self.assertAlmostEqual(b.d, a.d, places=12)
        self.assertAlmostEqual(b.t_y, -0.1, places=12)

    def test_target_at_robot(self):
        robot = rb.RobotState(0.3, 0.0, 0.2, 0.0, 1.0, 0.0)
        obs = ep.build_observation(robot, (0.3, 0.0, 0.2))
        self.assertEqual((obs.t_x, obs.t_y, obs.t_z, obs.d), (0.0, 0.0, 0.0, 0.0))

    def test_vector(self):
        robot = rb.RobotState(0.0, 0.0, 0.0, 0.1, 0.2, 0.3)
        vec = ep.observation_vector(ep.build_observation(robot, (0.1, 0.0, 0.1)))
        self.assertEqual(vec.shape, (ep.OBS_DIM,))
        self.assertTrue(np.all(np.isfinite(vec)))


class TestSampleTarget(unittest.TestCase):

    def test_annulus_law(self):
        """Distances follow the annulus-uniform CDF"""
        rng = np.random.default_rng(42)
        ids = []
        for _ in range(5000):
            (tx, ty, tz), d = ep.sample_target((0.0, 0.0), rng, WIDE, CONST)
            ids.append(d)
            self.assertEqual(ty, 0.0)
        ids = np.array(ids)
        self.assertTrue(np.all(ids > 0.1 - 1e-12))
        self.assertTrue(np.all(ids <= 0.5 + 1e-12))
        cdf = lambda r: np.clip((r ** 2 - 0.01) / (0.25 - 0.01), 0.0, 1.0)
        self.assertGreater(stats.kstest(ids, cdf).pvalue, 1e-3)

    def test_inside_bounds(self):
        rng = np.random.default_rng(1)
        fr = hf.FLAT_RECT
        for _ in range(2000):
            (tx, ty, tz), _ = ep.sample_target((0.45, 0.45), rng, fr, CONST, FIELD)
            self.assertTrue(hf.in_rect(fr, tx, tz))
            self.assertEqual(ty, 0.0)

    def test_no_room(self):
        rng = np.random.default_rng(0)
        tiny = hf.AreaRect(0.0, 0.05, 0.0, 0.05, hf.FLAT)
        with self.assertRaises(ep.tlTargetError):
            ep.sample_target((0.0, 0.0), rng, tiny, CONST)


class TestStepEpisode(unittest.TestCase):

    def test_immediate_reach(self):
        state, robot = episode_at((-0.95, 0.0, 0.0))
        state, robot, reward, done, info = ep.step_episode(
            state, robot, (0.0, 0.0), FIELD, PARAMS, CONST)
        self.assertTrue(done)
        self.assertEqual(state.status, ep.REACHED)
        mes = ep.max_episode_steps(0.05)
        self.assertAlmostEqual(reward, 250.0 + 50.0 - 1.0 / mes, delta=1e-9)
        self.assertEqual(info['episode']['status'], ep.REACHED)
        self.assertEqual(info['episode']['steps'], 1)

    def test_zero_action_timeout(self):
        state, robot = episode_at((-0.7, 0.0, 0.0))
        n = 0
        done = False
        while not done:
            state, robot, reward, done, info = ep.step_episode(
                state, robot, (0.0, 0.0), FIELD, PARAMS, CONST)
            n += 1
            self.assertEqual(reward, 0.0)
        self.assertEqual(state.status, ep.TIMEOUT)
        self.assertEqual(n, 360)
        self.assertAlmostEqual(info["episode"]["time_s"], 36.0, places=9)

    def test_drift(self):
        state, robot = episode_at((-0.7, 0.0, 0.0), yaw=math.pi / 2)
        done = False
        while not done:
            state, robot, reward, done, info = ep.step_episode(
                state, robot, (3.0, 3.0), FIELD, PARAMS, CONST)
        self.assertEqual(state.status, ep.DRIFTED)
        self.assertLess(state.step_count, 20)

    def test_next_episode_keeps_pose(self):
        rng = np.random.default_rng(3)
        state, robot = episode_at((-0.95, 0.0, 0.0))
        state, robot, reward, done, info = ep.step_episode(
            state, robot, (0.0, 0.0), FIELD, PARAMS, CONST, rng, hf.FLAT_RECT)
        self.assertTrue(done)
        self.assertEqual(state.status, ep.RUNNING)
        self.assertEqual(state.episode_id, 1)
        self.assertEqual((state.initial_x, state.initial_z), (robot.x, robot.z))
        self.assertEqual(state.step_count, 0)

    def test_finished_episode(self):
        state, robot = episode_at((-0.95, 0.0, 0.0))
        state = state._replace(status=ep.TIMEOUT)
        with self.assertRaises(ep.tlEpisodeError):
            ep.step_episode(state, robot, (0.0, 0.0), FIELD, PARAMS, CONST)


class TestTargetReachEnv(unittest.TestCase):

    def test_reset_and_step(self):
        env = ep.TargetReachEnv(FIELD, hf.FLAT_RECT, PARAMS, CONST, seed=4)
        obs = env.reset()
        self.assertEqual(obs.shape, (ep.OBS_DIM,))
        self.assertTrue(hf.in_rect(hf.FLAT_RECT, env.robot.x, env.robot.z))
        obs, reward, done, info = env.step((1.0, 1.0))
        self.assertEqual(obs.shape, (ep.OBS_DIM,))
        self.assertIn('boundary_hit', info)

    def test_episode_rollover(self):
        """An ended episode is logged and the next starts at the same pose"""
        env = ep.TargetReachEnv(FIELD, hf.FLAT_RECT, PARAMS, CONST, seed=9)
        env.reset()
        done = False
        while not done:
            _, _, done, info = env.step((0.0, 0.0))
        self.assertEqual(len(env.episodes), 1)
        self.assertEqual(env.episodes[0]['status'], ep.TIMEOUT)
        self.assertEqual(env.state.episode_id, 1)
        self.assertEqual((env.state.initial_x, env.state.initial_z),
                         (env.robot.x, env.robot.z))
        self.assertEqual(env.episode_log()[0]['env'], hf.FLAT)

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            env = ep.TargetReachEnv(FIELD, hf.FLAT_RECT, PARAMS, CONST, seed=5)
            obs = [env.reset()]
            for a in [(1.0, 2.0), (3.0, 3.0), (-1.0, 0.5)]:
                obs.append(env.step(a)[0])
            runs.append(np.array(obs))
        self.assertTrue(np.array_equal(runs[0], runs[1]))

    def test_area_too_small(self):
        tiny = hf.AreaRect(0.0, 0.1, 0.0, 0.1, hf.FLAT)
        env = ep.TargetReachEnv(FIELD, tiny, PARAMS, CONST, seed=0)
        with self.assertRaises(tlConfigError):
            env.reset()

    def test_no_target_room(self):
        narrow = hf.AreaRect(0.0, 0.13, 0.0, 0.13, hf.FLAT)
        env = ep.TargetReachEnv(FIELD, narrow, PARAMS,
                                CONST.copy(max_target_tries=2,
                                           max_spawn_retries=3), seed=0)
        # no point of a 13 cm square is 0.1 m from its centre region
        with self.assertRaises(tlConfigError):
            env.reset()
        self.assertEqual(env.n_respawns, 4)


def test_constants_validate():
    with pytest.raises(tlConfigError):
        ep.TaskConstants(outer_factor=0.5).validate()
    with pytest.raises(tlConfigError):
        ep.TaskConstants(progress_metric='sideways').validate()
    assert ep.TaskConstants().validate().outer_radius == pytest.approx(0.5)
