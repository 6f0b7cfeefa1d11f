#!/usr/bin/env python
#
# POLICY -- Gaussian policy and value networks in torch.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Feed-forward tanh networks built on torch.nn, kept in float64.  The
    policy maps the 10-dim observation to the mean of a diagonal
    Gaussian (torch.distributions.Normal) over the two wheel commands,
    with a state-independent log-std vector; the value network maps the
    same observation to a scalar.

    Gradients of the PPO loss come from autograd; the test suite checks
    them against central finite differences.  Action noise is drawn
    from the caller's numpy Generator, so a seeded run does not depend
    on torch's global random state.

    Policy Interface
    ----------------

          net = PolicyNet      (obs_dim, hidden, act_dim, seed)
         vnet = ValueNet       (obs_dim, hidden, seed)
     a, logp  = act            (net, obs, rng)
            L = loss           (net, batch, clip_eps, entropy_coef, vf_coef, weight)
            g = gradients      (net, batch, clip_eps, entropy_coef, vf_coef, weight)
                save_checkpoint (path, net, vnet, metadata)
     (net, vnet, meta) = load_checkpoint (path)
           fn = actor          (net, deterministic)
           fn = random_actor   (limit)

Import via

.. code-block:: python

    from tlab import policy
'''

import copy
import json
import math
import logging
from collections import namedtuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.distributions import Normal
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from tlab.episode import OBS_DIM, ACT_DIM


logger = logging.getLogger('tlab.policy')

CHECKPOINT_VERSION = 2
HIDDEN = (64, 64)
DTYPE = torch.float64

# Bounds applied to log_std before exponentiation.
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


class tlPolicyError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


Batch = namedtuple('Batch', ['obs', 'actions', 'log_probs', 'advantages',
                             'returns'])
Batch.__doc__ = '''Minibatch arrays: obs (n, 10), actions (n, 2) unclamped
samples, log_probs (n,) under the behaviour policy, advantages (n,) and
returns (n,).'''


def as_tensor(x):
    '''float64 tensor view of an array-like.'''
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def _torch_seed(seed, rng):
    rng = rng if rng is not None else np.random.default_rng(seed)
    return int(rng.integers(2 ** 62))


def mlp(sizes, out_gain, seed):
    '''Tanh nn.Sequential with orthogonal weights and zero biases.

    Hidden layers use gain sqrt(2), the output layer `out_gain`.  The
    weights depend only on `seed`; torch's global generator is left as
    it was.
    '''
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        layers = []
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            lin = nn.Linear(sizes[i], sizes[i + 1], dtype=DTYPE)
            gain = out_gain if i == n_layers - 1 else math.sqrt(2.0)
            nn.init.orthogonal_(lin.weight, gain)
            nn.init.zeros_(lin.bias)
            layers.append(lin)
            if i < n_layers - 1:
                layers.append(nn.Tanh())
        return nn.Sequential(*layers)


class FlatParams(object):
    '''Flat numpy view of a module's parameters (checkpoints, tests).'''

    @property
    def n_params(self):
        return sum(p.numel() for p in self.parameters())

    def get_params(self):
        with torch.no_grad():
            return parameters_to_vector(self.parameters()).numpy().copy()

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != self.n_params:
            raise tlPolicyError("Expected %d parameters, got %d" %
                                (self.n_params, flat.size))
        with torch.no_grad():
            vector_to_parameters(as_tensor(flat).clone(), self.parameters())

    def flat_grad(self):
        '''Gradients in get_params() order; parameters without a
        gradient contribute zeros.'''
        return np.concatenate([
            (p.grad.detach().numpy() if p.grad is not None
             else np.zeros(tuple(p.shape))).ravel()
            for p in self.parameters()])

    def copy(self):
        return copy.deepcopy(self)


# =========================================================================
#  Policy and value networks
# =========================================================================

class PolicyNet(FlatParams, nn.Module):
    '''
         POLICYNET -- Diagonal-Gaussian policy obs -> N(mean(obs), exp(log_std)^2).

         The flat parameter vector holds log_std first, then the layer
         weights and biases.
    '''
    def __init__(self, obs_dim=OBS_DIM, hidden=HIDDEN, act_dim=ACT_DIM, seed=0,
                 rng=None, log_std_init=0.0):
        nn.Module.__init__(self)
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.log_std = nn.Parameter(torch.full((self.act_dim,), float(log_std_init),
                                               dtype=DTYPE))
        self.body = mlp((self.obs_dim,) + self.hidden + (self.act_dim,),
                        0.01, _torch_seed(seed, rng))

    def forward(self, obs):
        return self.body(obs)

    def distribution(self, obs):
        ''' Normal over actions for an (n, obs_dim) tensor.
        '''
        mean = self(obs)
        std = torch.exp(self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX))
        return Normal(mean, std.expand_as(mean))

    def set_log_std(self, values):
        with torch.no_grad():
            self.log_std.copy_(as_tensor(values).expand_as(self.log_std))

    def mean(self, obs):
        with torch.no_grad():
            return self(as_tensor(np.atleast_2d(obs))).numpy()

    def log_prob(self, obs, actions):
        with torch.no_grad():
            dist = self.distribution(as_tensor(np.atleast_2d(obs)))
            return dist.log_prob(as_tensor(np.atleast_2d(actions))).sum(-1).numpy()

    def entropy(self):
        ''' Entropy of the action distribution (state independent).
        '''
        with torch.no_grad():
            std = torch.exp(self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX))
            return float(Normal(torch.zeros_like(std), std).entropy().sum())


class ValueNet(FlatParams, nn.Module):
    '''
         VALUENET -- State-value estimate obs -> V(obs).
    '''
    def __init__(self, obs_dim=OBS_DIM, hidden=HIDDEN, seed=0, rng=None):
        nn.Module.__init__(self)
        self.obs_dim = int(obs_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.body = mlp((self.obs_dim,) + self.hidden + (1,), 1.0,
                        _torch_seed(seed, rng))

    def forward(self, obs):
        return self.body(obs).squeeze(-1)

    def value(self, obs):
        with torch.no_grad():
            return self(as_tensor(np.atleast_2d(obs))).numpy()


def _check_obs(obs, obs_dim):
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != obs_dim:
        raise tlPolicyError("Observation must have %d components, got %d" %
                            (obs_dim, obs.shape[-1]))
    if not np.all(np.isfinite(obs)):
        raise tlPolicyError("Non-finite observation: %s" % (obs,))
    return obs


# --------------------------------------------------------------------
# ACT -- Sample an action and its (pre-clamp) log-density.
#
def act(net, obs, rng):
    '''Sample from the policy.

    Parameters
    ----------
    net : PolicyNet

    obs : array, shape (10,) or (n, 10)

    rng : numpy.random.Generator
        Source of the Gaussian noise.

    Returns
    -------
    (action, log_prob)
        The unclamped sample and its log-density; a single observation
        gives shapes (2,) and a float, a batch gives (n, 2) and (n,).
        The environment applies the [-3, 3] clamp.
    '''
    obs = _check_obs(obs, net.obs_dim)
    single = obs.ndim == 1
    with torch.no_grad():
        dist = net.distribution(as_tensor(np.atleast_2d(obs)))
        noise = as_tensor(rng.standard_normal(tuple(dist.mean.shape)))
        actions = dist.mean + dist.stddev * noise
        logp = dist.log_prob(actions).sum(-1)
    actions, logp = actions.numpy(), logp.numpy()
    if single:
        return actions[0], float(logp[0])
    return actions, logp


# --------------------------------------------------------------------
# LOSS / GRADIENTS -- PPO objective and its autograd gradient.
#
def policy_loss(net, batch, clip_eps, entropy_coef, weight=1.0):
    '''Clipped-surrogate loss as a torch scalar, plus the detached ratios.

        L = weight * (-mean(min(r*A, clip(r, 1-eps, 1+eps)*A))
                      - entropy_coef * entropy)
    '''
    obs = as_tensor(_check_obs(batch.obs, net.obs_dim))
    dist = net.distribution(obs)
    logp = dist.log_prob(as_tensor(np.atleast_2d(batch.actions))).sum(-1)
    ratio = torch.exp(logp - as_tensor(batch.log_probs))
    adv = as_tensor(batch.advantages)
    surrogate = torch.min(ratio * adv,
                          torch.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv)
    entropy = dist.entropy().sum(-1).mean()
    loss_t = weight * (-surrogate.mean() - entropy_coef * entropy)
    return loss_t, ratio.detach().numpy()


def value_loss(vnet, batch, vf_coef, weight=1.0):
    '''vf_coef times the mean squared error to the returns (torch scalar).'''
    obs = as_tensor(_check_obs(batch.obs, vnet.obs_dim))
    return weight * vf_coef * F.mse_loss(vnet(obs), as_tensor(batch.returns))


def _loss_tensor(net, batch, clip_eps, entropy_coef, vf_coef, weight):
    if isinstance(net, PolicyNet):
        return policy_loss(net, batch, clip_eps, entropy_coef, weight)[0]
    if isinstance(net, ValueNet):
        return value_loss(net, batch, vf_coef, weight)
    raise tlPolicyError("Unknown network type %s" % type(net).__name__)


def loss(net, batch, clip_eps=0.2, entropy_coef=0.0, vf_coef=0.5, weight=1.0):
    '''Scalar loss of `net` on `batch`: policy_loss() for a PolicyNet,
    value_loss() for a ValueNet.'''
    with torch.no_grad():
        return float(_loss_tensor(net, batch, clip_eps, entropy_coef, vf_coef,
                                  weight))


def gradients(net, batch, clip_eps=0.2, entropy_coef=0.0, vf_coef=0.5,
              weight=1.0):
    '''Gradient of loss() with respect to net.get_params().'''
    if len(batch.obs) == 0:
        raise tlPolicyError("Empty batch")
    net.zero_grad()
    _loss_tensor(net, batch, clip_eps, entropy_coef, vf_coef, weight).backward()
    grad = net.flat_grad()
    net.zero_grad()
    return grad


# --------------------------------------------------------------------
# CHECKPOINTS -- Versioned npz with architecture and flat parameters.
#
def save_checkpoint(path, net, vnet, metadata=None):
    ''' Write a policy/value checkpoint to `path` (npz).
    '''
    meta = json.dumps(metadata or {}, sort_keys=True)
    with open(path, 'wb') as fd:
        np.savez(fd,
                 format_version=np.array(CHECKPOINT_VERSION),
                 obs_dim=np.array(net.obs_dim),
                 act_dim=np.array(net.act_dim),
                 hidden=np.array(net.hidden, dtype=np.int64),
                 activation=np.array('tanh'),
                 policy_params=net.get_params(),
                 value_params=vnet.get_params(),
                 metadata=np.array(meta))
    logger.info("Wrote checkpoint %s" % path)


def load_checkpoint(path):
    ''' Read a checkpoint written by save_checkpoint().

    Returns
    -------
    (PolicyNet, ValueNet, metadata dict)
    '''
    try:
        data = np.load(path, allow_pickle=False)
    except (IOError, OSError, ValueError) as e:
        raise tlPolicyError("Cannot read checkpoint '%s': %s" % (path, e))
    with data:
        if 'format_version' not in data.files:
            raise tlPolicyError("'%s' is not a checkpoint" % path)
        version = int(data['format_version'])
        if version != CHECKPOINT_VERSION:
            raise tlPolicyError("Checkpoint '%s' has format version %d, "
                                "expected %d" % (path, version, CHECKPOINT_VERSION))
        if str(data['activation']) != 'tanh':
            raise tlPolicyError("Unsupported activation '%s'" % data['activation'])
        obs_dim = int(data['obs_dim'])
        act_dim = int(data['act_dim'])
        hidden = tuple(int(h) for h in data['hidden'])
        net = PolicyNet(obs_dim, hidden, act_dim)
        net.set_params(data['policy_params'])
        vnet = ValueNet(obs_dim, hidden)
        vnet.set_params(data['value_params'])
        meta = json.loads(str(data['metadata']))
    return net, vnet, meta


# --------------------------------------------------------------------
# ACTORS -- Callables (obs, rng) -> clamped action.
#
def actor(net, deterministic=False, limit=3.0):
    ''' Wrap a policy as a callable for collection and evaluation.
        The deterministic actor returns the clamped mean.
    '''
    def _act(obs, rng):
        if deterministic:
            a = net.mean(_check_obs(obs, net.obs_dim))[0]
        else:
            a, _ = act(net, obs, rng)
        return np.clip(a, -limit, limit)
    return _act


def random_actor(limit=3.0):
    ''' Uniform wheel commands in [-limit, limit].
    '''
    def _act(obs, rng):
        return rng.uniform(-limit, limit, size=ACT_DIM)
    return _act
