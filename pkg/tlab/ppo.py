#!/usr/bin/env python
#
# PPO -- Proximal policy optimization with GAE and linear LR decay.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    PPO trainer for the target-reaching task.  Rollouts are collected
    lock-step over `n_envs` environments in a single thread, advantages
    come from GAE, and the clipped surrogate is optimized with
    torch.optim.Adam over shuffled minibatches.  Rewards enter the
    buffer multiplied by `reward_scale`; the logs keep the task units.
    A fixed seed reproduces the training log bit for bit.

    PPO Interface
    -------------

        adv, ret = gae        (rewards, values, dones, gamma, lam, last_value)
           stats = ppo_update (net, vnet, batch, config, rng, lr, optimizers)
              lr = lr_at      (step, total_steps, lr0)
          result = train      (config, env_factory, initial_checkpoint, seed)

Import via

.. code-block:: python

    from tlab import ppo
'''

import math
import logging
from collections import namedtuple

import numpy as np
import pandas as pd
import torch
import torch.optim as optim

from tlab.Util import tlConfigError, ParamSet, make_rng
from tlab.Util import check_positive, check_range, check_choice
from tlab.Util import parse_bool, optional_str
from tlab import episode as ep
from tlab import policy as pol


logger = logging.getLogger('tlab.ppo')

TRAIN_LOG_COLUMNS = ['iteration', 'env_steps', 'mean_reward', 'success_rate',
                     'clip_fraction', 'entropy', 'lr']
EPISODE_LOG_COLUMNS = ['iteration', 'env', 'episode', 'initial_distance',
                       'steps', 'status', 'total_reward', 'mo', 'time_s']


class tlPPOError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


# ###################################
#  Configuration
# ###################################

class PpoConfig(ParamSet):
    '''PPO hyperparameters ([ppo] section plus per-stage overrides).
    '''
    FIELDS = (
        ('total_steps',         int,          50000),  # aggregate env steps
        ('batch_size',          int,          64),
        ('epochs',              int,          10),
        ('lr',                  float,        3e-4),
        ('clip_eps',            float,        0.2),
        ('gamma',               float,        0.99),
        ('entropy_coef',        float,        5e-4),
        ('gae_lambda',          float,        0.95),
        ('adv_norm',            parse_bool,   True),
        ('lr_schedule',         str,          'linear'),
        ('n_envs',              int,          9),
        ('rollout_steps',       int,          256),    # per env per update
        ('vf_coef',             float,        0.5),
        ('max_grad_norm',       float,        0.5),    # 0 = no clipping
        ('reward_scale',        float,        0.01),   # buffer rewards only
        ('log_std_init',        float,        0.0),
        ('pretrain_checkpoint', optional_str, None),
        ('checkpoint_every',    int,          0),      # iterations, 0 = final only
    )

    def validate(self):
        if int(self.total_steps) < 0:
            raise tlConfigError("'total_steps' must be >= 0")
        for name in ('batch_size', 'epochs', 'n_envs', 'rollout_steps'):
            if int(getattr(self, name)) < 1:
                raise tlConfigError("'%s' must be >= 1" % name)
        if self.adv_norm and int(self.batch_size) < 2:
            raise tlConfigError("'batch_size' must be >= 2 with adv_norm on")
        check_positive('lr', self.lr)
        check_positive('clip_eps', self.clip_eps)
        check_range('gamma', self.gamma, 0.0, 1.0, lo_open=True)
        check_range('gae_lambda', self.gae_lambda, 0.0, 1.0)
        check_range('entropy_coef', self.entropy_coef, 0.0, float('inf'))
        check_range('vf_coef', self.vf_coef, 0.0, float('inf'))
        check_range('max_grad_norm', self.max_grad_norm, 0.0, float('inf'))
        check_positive('reward_scale', self.reward_scale)
        check_choice('lr_schedule', self.lr_schedule, ('linear', 'constant'))
        if int(self.checkpoint_every) < 0:
            raise tlConfigError("'checkpoint_every' must be >= 0")
        return self


# ###################################
#  Optimizer and rollout storage
# ###################################

def make_optimizers(net, vnet, lr):
    '''One torch.optim.Adam per network (default moment constants).'''
    return (optim.Adam(net.parameters(), lr=lr),
            optim.Adam(vnet.parameters(), lr=lr))


def set_lr(optimizer, lr):
    for group in optimizer.param_groups:
        group['lr'] = lr


def _step(optimizer, module, loss_t, max_grad_norm):
    optimizer.zero_grad()
    loss_t.backward()
    if max_grad_norm > 0:
        torch.nn.utils.clip_grad_norm_(module.parameters(), max_norm=max_grad_norm)
    optimizer.step()


class RolloutBuffer(object):
    '''
         ROLLOUTBUFFER -- Time-major (T, n_envs) storage of one rollout.
    '''
    def __init__(self, n_steps, n_envs, obs_dim=ep.OBS_DIM, act_dim=ep.ACT_DIM):
        self.n_steps = n_steps
        self.n_envs = n_envs
        self.obs = np.zeros((n_steps, n_envs, obs_dim))
        self.actions = np.zeros((n_steps, n_envs, act_dim))
        self.log_probs = np.zeros((n_steps, n_envs))
        self.rewards = np.zeros((n_steps, n_envs))
        self.values = np.zeros((n_steps, n_envs))
        self.dones = np.zeros((n_steps, n_envs))
        self.pos = 0

    @property
    def full(self):
        return self.pos == self.n_steps

    def add(self, obs, actions, log_probs, rewards, values, dones):
        if self.full:
            raise tlPPOError("Rollout buffer is full")
        t = self.pos
        self.obs[t] = obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.rewards[t] = rewards
        self.values[t] = values
        self.dones[t] = dones
        self.pos += 1

    def batch(self, last_values, gamma, lam):
        ''' Compute GAE and return the flattened Batch.
        '''
        if not self.full:
            raise tlPPOError("Rollout buffer holds %d of %d steps" %
                             (self.pos, self.n_steps))
        adv, ret = gae(self.rewards, self.values, self.dones, gamma, lam,
                       last_values)
        n = self.n_steps * self.n_envs
        return pol.Batch(self.obs.reshape(n, -1), self.actions.reshape(n, -1),
                         self.log_probs.reshape(n), adv.reshape(n),
                         ret.reshape(n))


# --------------------------------------------------------------------
# GAE -- Generalized advantage estimation by backward recursion.
#
def gae(rewards, values, dones, gamma, lam, last_value=0.0):
    '''Generalized advantage estimates.

    Parameters
    ----------
    rewards, values, dones : array, shape (T,) or (T, n_envs)
        Time-major sequences; dones[t] marks that step t ended an episode.

    gamma, lam : float

    last_value : float or array
        V of the state after the last step, used unless dones[-1].

    Returns
    -------
    (advantages, returns)
        delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t,
        A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}, returns = A + V.
    '''
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise tlPPOError("gae() needs aligned sequences, got shapes %s, %s, %s"
                         % (rewards.shape, values.shape, dones.shape))
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = np.broadcast_to(np.asarray(last_value, dtype=np.float64),
                                 rewards.shape[1:])
    next_adv = np.zeros(rewards.shape[1:])
    for t in range(T - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_adv = delta + gamma * lam * live * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


def lr_at(step, total_steps, lr0):
    '''Linearly decayed learning rate lr0*(1 - step/total_steps).'''
    if total_steps <= 0:
        return lr0
    frac = min(max(float(step) / float(total_steps), 0.0), 1.0)
    return lr0 * (1.0 - frac)


def normalize_advantages(adv):
    '''Standardize to mean 0 and std 1.'''
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def _subset(batch, idx):
    return pol.Batch(*(np.asarray(f)[idx] for f in batch))


# --------------------------------------------------------------------
# PPO_UPDATE -- Epochs of clipped-surrogate minibatch steps.
#
def ppo_update(net, vnet, batch, config, rng, lr=None, optimizers=None):
    '''Optimize the policy and value networks on one rollout.

    The networks are updated in place.  For each of `config.epochs`
    passes the samples are shuffled and split into minibatches of
    `batch_size`; every minibatch does one Adam step on each network,
    after clipping the gradient norm to `max_grad_norm`.

    Returns
    -------
    stats : dict
        clip_fraction, entropy, policy_loss, value_loss, approx_kl.

    Raises
    ------
    tlPPOError
        When a loss turns non-finite.
    '''
    lr = config.lr if lr is None else lr
    if optimizers is None:
        optimizers = make_optimizers(net, vnet, lr)
    opt_pi, opt_v = optimizers
    set_lr(opt_pi, lr)
    set_lr(opt_v, lr)
    n = len(batch.obs)
    if n == 0:
        raise tlPPOError("ppo_update() on an empty rollout")

    max_norm = float(config.max_grad_norm)
    clipped = 0
    seen = 0
    p_losses, v_losses, kls = [], [], []
    for epoch in range(int(config.epochs)):
        perm = rng.permutation(n)
        for start in range(0, n, int(config.batch_size)):
            mb = _subset(batch, perm[start:start + int(config.batch_size)])
            if config.adv_norm and len(mb.advantages) > 1:
                mb = mb._replace(advantages=normalize_advantages(mb.advantages))

            p_loss, ratio = pol.policy_loss(net, mb, config.clip_eps,
                                            config.entropy_coef)
            v_loss = pol.value_loss(vnet, mb, config.vf_coef)
            if not (math.isfinite(p_loss.item()) and math.isfinite(v_loss.item())):
                raise tlPPOError("Non-finite loss at epoch %d, sample %d: "
                                 "policy %r, value %r, max |ratio| %r" %
                                 (epoch, start, p_loss.item(), v_loss.item(),
                                  float(np.max(np.abs(ratio)))))

            clipped += int(np.sum(np.abs(ratio - 1.0) > config.clip_eps))
            seen += len(ratio)
            p_losses.append(p_loss.item())
            v_losses.append(v_loss.item())
            kls.append(float(np.mean(-np.log(ratio))))

            _step(opt_pi, net, p_loss, max_norm)
            _step(opt_v, vnet, v_loss, max_norm)

    return dict(clip_fraction=clipped / float(seen),
                entropy=net.entropy(),
                policy_loss=float(np.mean(p_losses)),
                value_loss=float(np.mean(v_losses)),
                approx_kl=float(np.mean(kls)))


# ###################################
#  Training loop
# ###################################

TrainResult = namedtuple('TrainResult', ['policy', 'value', 'log', 'episodes',
                                         'env_steps'])


def _initial_nets(config, initial_checkpoint, seed):
    if initial_checkpoint is None:
        rng = make_rng(seed, 3)
        net = pol.PolicyNet(rng=rng, log_std_init=config.log_std_init)
        vnet = pol.ValueNet(rng=rng)
        return net, vnet
    if isinstance(initial_checkpoint, str):
        net, vnet, meta = pol.load_checkpoint(initial_checkpoint)
        logger.info("Loaded initial checkpoint %s (%s)" % (initial_checkpoint, meta))
        return net, vnet
    net, vnet = initial_checkpoint
    return net.copy(), vnet.copy()


def _make_envs(env_factory, n_envs):
    envs = []
    for i in range(n_envs):
        try:
            envs.append(env_factory(i))
        except Exception as e:
            raise tlPPOError("Environment factory failed for env %d: %s" % (i, e))
    return envs


def train(config, env_factory, initial_checkpoint=None, seed=0,
          on_checkpoint=None):
    '''Run PPO until `config.total_steps` aggregate environment steps.

    Parameters
    ----------
    config : PpoConfig

    env_factory : callable
        env_factory(i) returns the i-th environment (TargetReachEnv or
        anything with reset() and step()).

    initial_checkpoint : str, (PolicyNet, ValueNet) or None
        Starting parameters; a path is loaded with load_checkpoint().

    seed : int

    on_checkpoint : callable or None
        Called as on_checkpoint(iteration, env_steps, net, vnet) every
        `checkpoint_every` iterations.

    Returns
    -------
    TrainResult(policy, value, log, episodes, env_steps)
        log and episodes are DataFrames with TRAIN_LOG_COLUMNS and
        EPISODE_LOG_COLUMNS.
    '''
    config.validate()
    torch.set_num_threads(1)        # bitwise-reproducible reductions
    net, vnet = _initial_nets(config, initial_checkpoint, seed)
    total = int(config.total_steps)
    if total == 0:
        return TrainResult(net, vnet, pd.DataFrame(columns=TRAIN_LOG_COLUMNS),
                           pd.DataFrame(columns=EPISODE_LOG_COLUMNS), 0)

    n_envs = int(config.n_envs)
    envs = _make_envs(env_factory, n_envs)
    rng = make_rng(seed, 2)
    opt_pi, opt_v = make_optimizers(net, vnet, config.lr)
    scale = float(config.reward_scale)
    obs = np.array([env.reset() for env in envs])

    rows, episode_rows = [], []
    env_steps = 0
    iteration = 0
    while env_steps < total:
        iteration += 1
        if config.lr_schedule == 'linear':
            lr = lr_at(env_steps, total, config.lr)
        else:
            lr = config.lr
        remaining = total - env_steps
        n_steps = min(int(config.rollout_steps), -(-remaining // n_envs))
        buf = RolloutBuffer(n_steps, n_envs)
        finished = []
        for t in range(n_steps):
            actions, logps = pol.act(net, obs, rng)
            values = vnet.value(obs)
            next_obs = np.empty_like(obs)
            rewards = np.zeros(n_envs)
            dones = np.zeros(n_envs)
            for i, env in enumerate(envs):
                o, r, d, info = env.step(actions[i])
                next_obs[i] = o
                rewards[i] = r
                dones[i] = float(d)
                if d:
                    row = dict(info['episode'], iteration=iteration,
                               env=getattr(env, 'name', str(i)))
                    finished.append(row)
            buf.add(obs, actions, logps, scale * rewards, values, dones)
            obs = next_obs
        env_steps += n_steps * n_envs

        batch = buf.batch(vnet.value(obs), config.gamma, config.gae_lambda)
        stats = ppo_update(net, vnet, batch, config, rng, lr, (opt_pi, opt_v))

        if finished:
            mean_reward = float(np.mean([f['total_reward'] for f in finished]))
            success = float(np.mean([f['status'] == ep.REACHED for f in finished]))
        else:
            mean_reward = float('nan')
            success = 0.0
        rows.append(dict(iteration=iteration, env_steps=env_steps,
                         mean_reward=mean_reward, success_rate=success,
                         clip_fraction=stats['clip_fraction'],
                         entropy=stats['entropy'], lr=lr))
        episode_rows.extend(finished)
        logger.info("iter %d steps %d: %d episodes, reward %.3f, success %.3f, "
                    "clip %.3f, kl %.5f" % (iteration, env_steps, len(finished),
                                            mean_reward, success,
                                            stats['clip_fraction'],
                                            stats['approx_kl']))
        if (on_checkpoint is not None and int(config.checkpoint_every) > 0 and
                iteration % int(config.checkpoint_every) == 0):
            on_checkpoint(iteration, env_steps, net, vnet)

    log = pd.DataFrame(rows, columns=TRAIN_LOG_COLUMNS)
    episodes = pd.DataFrame(episode_rows, columns=EPISODE_LOG_COLUMNS)
    return TrainResult(net, vnet, log, episodes, env_steps)
