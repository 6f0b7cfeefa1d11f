"""
    test_ppo.py - test functionality in tlab/ppo.py
    To run the test everything simply do:
        pytest tests/test_ppo.py
"""

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd
import os
import sys
import unittest
import pytest
import numpy as np
import torch

# position the script relative to the code
ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
sys.path.append(os.path.join(ROOT_PATH, '..'))
from tlab import ppo
from tlab import policy as pol
from tlab.Util import tlConfigError


class ToyEnv(object):
    '''Five-step episodes rewarding a left command near 1.'''
    def __init__(self, i):
        self.name = 'toy-%d' % i
        self.i = i
        self.t = 0
        self.episode = 0
        self.total = 0.0

    def obs(self):
        o = np.zeros(10)
        o[0] = self.t / 5.0
        o[1] = self.i
        return o

    def reset(self):
        self.t = 0
        return self.obs()

    def step(self, action):
        self.t += 1
        reward = -abs(float(np.clip(action[0], -3, 3)) - 1.0)
        self.total += reward
        info = {}
        done = self.t >= 5
        if done:
            info['episode'] = dict(episode=self.episode, initial_distance=0.3,
                                   steps=self.t, status='timeout',
                                   total_reward=self.total, mo=1.0,
                                   time_s=0.5)
            self.episode += 1
            self.total = 0.0
            self.t = 0
        return self.obs(), reward, done, info


def small_config(**kw):
    cfg = ppo.PpoConfig(total_steps=64, n_envs=2, rollout_steps=16,
                        batch_size=16, epochs=2)
    return cfg.set(**kw)


class TestGae(unittest.TestCase):

    def test_hand_example(self):
        adv, ret = ppo.gae([1.0, 1.0, 1.0], [0.5, 0.5, 0.5], [0, 0, 1], 0.9, 0.8)
        self.assertTrue(np.allclose(adv, [1.8932, 1.31, 0.5], atol=1e-12))
        self.assertTrue(np.allclose(ret, adv + 0.5, atol=1e-15))

    def test_lambda_zero_is_td(self):
        r = np.array([0.3, -1.0, 2.0, 0.5])
        v = np.array([1.0, 0.2, -0.4, 0.9])
        d = np.array([0, 0, 0, 0])
        adv, _ = ppo.gae(r, v, d, 0.95, 0.0, last_value=0.7)
        nxt = np.append(v[1:], 0.7)
        self.assertTrue(np.allclose(adv, r + 0.95 * nxt - v, atol=1e-12))

    def test_lambda_one_is_monte_carlo(self):
        r = np.array([1.0, 2.0, 3.0, 4.0])
        v = np.array([0.1, 0.2, 0.3, 0.4])
        _, ret = ppo.gae(r, v, [0, 0, 0, 1], 0.9, 1.0)
        mc = [1 + 0.9 * 2 + 0.81 * 3 + 0.729 * 4,
              2 + 0.9 * 3 + 0.81 * 4,
              3 + 0.9 * 4,
              4.0]
        self.assertTrue(np.allclose(ret, mc, atol=1e-12))

    def test_episode_boundary(self):
        """A done step does not bootstrap from the next episode"""
        adv, _ = ppo.gae([1.0, 1.0], [0.0, 100.0], [1, 0], 0.99, 0.95,
                         last_value=0.0)
        self.assertEqual(adv[0], 1.0)

    def test_bootstrap_last_value(self):
        adv, _ = ppo.gae([0.0], [0.0], [0], 0.5, 0.9, last_value=2.0)
        self.assertEqual(adv[0], 1.0)

    def test_vectorized(self):
        rng = np.random.default_rng(0)
        r = rng.standard_normal((6, 3))
        v = rng.standard_normal((6, 3))
        d = (rng.random((6, 3)) < 0.3).astype(float)
        last = rng.standard_normal(3)
        adv, ret = ppo.gae(r, v, d, 0.99, 0.95, last)
        for j in range(3):
            a, rt = ppo.gae(r[:, j], v[:, j], d[:, j], 0.99, 0.95, last[j])
            self.assertTrue(np.allclose(adv[:, j], a, atol=1e-14))
            self.assertTrue(np.allclose(ret[:, j], rt, atol=1e-14))

    def test_shape_mismatch(self):
        with self.assertRaises(ppo.tlPPOError):
            ppo.gae([1.0, 2.0], [0.0], [0, 0], 0.9, 0.9)


@pytest.mark.parametrize(
    "step, total, expected",
    [
        (0, 100, 1e-3),
        (50, 100, 5e-4),
        (100, 100, 0.0),
        (150, 100, 0.0),
        (10, 0, 1e-3),
    ]
)
def test_lr_at(step, total, expected):
    assert abs(ppo.lr_at(step, total, 1e-3) - expected) < 1e-15


def test_normalize_advantages():
    adv = ppo.normalize_advantages(np.array([1.0, 2.0, 3.0, 10.0]))
    assert abs(adv.mean()) < 1e-12
    assert abs(adv.std() - 1.0) < 1e-6


def test_make_optimizers():
    net, vnet = pol.PolicyNet(seed=0), pol.ValueNet(seed=0)
    opt_pi, opt_v = ppo.make_optimizers(net, vnet, 1e-3)
    assert isinstance(opt_pi, torch.optim.Adam)
    assert isinstance(opt_v, torch.optim.Adam)
    n_pi = sum(p.numel() for g in opt_pi.param_groups for p in g['params'])
    assert n_pi == net.n_params
    ppo.set_lr(opt_v, 5e-5)
    assert all(g['lr'] == 5e-5 for g in opt_v.param_groups)


def test_first_adam_step_with_clipping():
    """The first Adam step moves each weight by lr against its gradient
    sign; the stored gradient is clipped to the norm cap"""
    lin = torch.nn.Linear(3, 1, bias=False, dtype=torch.float64)
    torch.nn.init.zeros_(lin.weight)
    opt = torch.optim.Adam(lin.parameters(), lr=0.1)
    g = torch.tensor([[2.0, -0.5, 0.0]], dtype=torch.float64)
    ppo._step(opt, lin, (lin.weight * g).sum(), max_grad_norm=0.5)
    assert np.allclose(lin.weight.detach().numpy(), [[-0.1, 0.1, 0.0]], atol=1e-7)
    assert float(lin.weight.grad.norm()) <= 0.5 + 1e-12


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_update_direction(sign):
    """A positive advantage on actions above the mean raises the mean,
    a negative one lowers it; returns above V raise V"""
    net, vnet = pol.PolicyNet(seed=0), pol.ValueNet(seed=1)
    obs = np.tile(np.linspace(-0.5, 0.5, 10), (64, 1))
    mu = net.mean(obs)
    actions = mu + np.array([0.5, 0.0])
    logp = net.log_prob(obs, actions)
    v0 = vnet.value(obs[:1])[0]
    batch = pol.Batch(obs, actions, logp, np.full(64, sign),
                      np.full(64, v0 + sign))
    cfg = small_config(epochs=1, batch_size=64, adv_norm=False,
                       entropy_coef=0.0, lr=1e-3)
    ppo.ppo_update(net, vnet, batch, cfg, np.random.default_rng(0))
    moved = net.mean(obs[:1])[0] - mu[0]
    assert sign * moved[0] > 0
    assert abs(moved[1]) < abs(moved[0])
    assert sign * (vnet.value(obs[:1])[0] - v0) > 0


@pytest.mark.parametrize(
    "field, value",
    [
        ('gamma', 0.0),
        ('gae_lambda', 1.5),
        ('lr', -1.0),
        ('batch_size', 0),
        ('lr_schedule', 'cosine'),
        ('total_steps', -5),
        ('max_grad_norm', -0.1),
        ('reward_scale', 0.0),
    ]
)
def test_config_validate(field, value):
    with pytest.raises(tlConfigError):
        ppo.PpoConfig(**{field: value}).validate()


class TestRolloutBuffer(unittest.TestCase):

    def test_fill_and_batch(self):
        buf = ppo.RolloutBuffer(3, 2)
        for t in range(3):
            buf.add(np.full((2, 10), t), np.zeros((2, 2)), np.zeros(2),
                    np.ones(2), np.zeros(2), np.zeros(2))
        self.assertTrue(buf.full)
        b = buf.batch(np.zeros(2), 1.0, 1.0)
        self.assertEqual(b.obs.shape, (6, 10))
        self.assertEqual(b.actions.shape, (6, 2))
        # undiscounted reward-to-go with a zero bootstrap
        self.assertTrue(np.allclose(b.returns, [3, 3, 2, 2, 1, 1]))
        with self.assertRaises(ppo.tlPPOError):
            buf.add(np.zeros((2, 10)), np.zeros((2, 2)), np.zeros(2),
                    np.zeros(2), np.zeros(2), np.zeros(2))

    def test_batch_before_full(self):
        buf = ppo.RolloutBuffer(3, 1)
        with self.assertRaises(ppo.tlPPOError):
            buf.batch(np.zeros(1), 0.99, 0.95)


class TestPpoUpdate(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.net = pol.PolicyNet(seed=0)
        self.vnet = pol.ValueNet(seed=1)
        obs = rng.standard_normal((64, 10))
        actions, logp = pol.act(self.net, obs, rng)
        self.batch = pol.Batch(obs, actions, logp, rng.standard_normal(64),
                               rng.standard_normal(64))

    def test_updates_in_place(self):
        before = self.net.get_params()
        vbefore = self.vnet.get_params()
        stats = ppo.ppo_update(self.net, self.vnet, self.batch, small_config(),
                               np.random.default_rng(1))
        self.assertFalse(np.array_equal(before, self.net.get_params()))
        self.assertFalse(np.array_equal(vbefore, self.vnet.get_params()))
        for key in ('clip_fraction', 'entropy', 'policy_loss', 'value_loss',
                    'approx_kl'):
            self.assertIn(key, stats)
            self.assertTrue(np.isfinite(stats[key]))
        self.assertTrue(0.0 <= stats['clip_fraction'] <= 1.0)

    def test_value_loss_drops(self):
        cfg = small_config(epochs=30, lr=1e-3)
        first = ppo.ppo_update(self.net, self.vnet, self.batch,
                               cfg.copy(epochs=1), np.random.default_rng(2))
        last = ppo.ppo_update(self.net, self.vnet, self.batch, cfg,
                              np.random.default_rng(3))
        self.assertLess(last['value_loss'], first['value_loss'])

    def test_non_finite(self):
        bad = self.batch._replace(advantages=np.full(64, np.nan))
        with self.assertRaises(ppo.tlPPOError):
            ppo.ppo_update(self.net, self.vnet, bad, small_config(),
                           np.random.default_rng(1))


class TestTrain(unittest.TestCase):

    def test_log_and_steps(self):
        res = ppo.train(small_config(), ToyEnv, seed=3)
        self.assertEqual(res.env_steps, 64)
        self.assertEqual(list(res.log.columns), ppo.TRAIN_LOG_COLUMNS)
        self.assertEqual(list(res.log['env_steps']), [32, 64])
        self.assertAlmostEqual(res.log['lr'].iloc[0], 3e-4, places=15)
        self.assertAlmostEqual(res.log['lr'].iloc[1], 1.5e-4, places=15)
        self.assertEqual(list(res.episodes.columns), ppo.EPISODE_LOG_COLUMNS)
        # 2 envs x 32 steps / 5-step episodes
        self.assertEqual(len(res.episodes), 2 * 6)

    def test_deterministic(self):
        a = ppo.train(small_config(), ToyEnv, seed=7)
        b = ppo.train(small_config(), ToyEnv, seed=7)
        self.assertTrue(np.array_equal(a.policy.get_params(), b.policy.get_params()))
        self.assertTrue(a.log.equals(b.log))

    def test_zero_steps(self):
        res = ppo.train(small_config(total_steps=0), ToyEnv)
        self.assertEqual(len(res.log), 0)
        self.assertEqual(res.env_steps, 0)

    def test_initial_nets_untouched(self):
        net, vnet = pol.PolicyNet(seed=5), pol.ValueNet(seed=5)
        before = net.get_params()
        res = ppo.train(small_config(), ToyEnv, (net, vnet))
        self.assertTrue(np.array_equal(before, net.get_params()))
        self.assertFalse(np.array_equal(before, res.policy.get_params()))

    def test_checkpoint_callback(self):
        calls = []
        ppo.train(small_config(checkpoint_every=1), ToyEnv,
                  on_checkpoint=lambda it, steps, n, v: calls.append((it, steps)))
        self.assertEqual(calls, [(1, 32), (2, 64)])

    def test_factory_failure(self):
        def factory(i):
            raise RuntimeError("no terrain")
        with self.assertRaises(ppo.tlPPOError):
            ppo.train(small_config(), factory)

    def test_constant_schedule(self):
        res = ppo.train(small_config(lr_schedule='constant'), ToyEnv)
        self.assertTrue((res.log['lr'] == 3e-4).all())

    def test_reward_scale_leaves_logs_in_task_units(self):
        a = ppo.train(small_config(reward_scale=1.0), ToyEnv, seed=4)
        b = ppo.train(small_config(reward_scale=0.01), ToyEnv, seed=4)
        first = lambda res: res.episodes[res.episodes['iteration'] == 1]
        self.assertTrue(np.array_equal(first(a)['total_reward'].values,
                                       first(b)['total_reward'].values))
        self.assertFalse(np.array_equal(a.value.get_params(),
                                        b.value.get_params()))
