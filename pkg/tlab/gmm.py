#!/usr/bin/env python
#
# GMM -- Two-component 1-D Gaussian mixture fit by EM, terrain classifier.
#

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017'  # yyyymmdd


'''
    Unsupervised terrain identification.  The rolling-std features of
    the flat and rough trajectories are pooled without their labels, a
    two-component Gaussian mixture is fit by expectation-maximization,
    and every window is assigned to a component.  The component with
    the lower mean is called flat.  The withheld ground truth is only
    used to score the result.

    GMM Interface
    -------------

     model, trace = em_fit           (data, init, max_iter, tol, sigma_floor,
                                      n_restarts, seed)
             resp = responsibilities (model, x)
           labels = classify         (model, values)
             eval = evaluate         (predictions, truth)
    results, table = window_sweep    (trajectories, windows, params, column)

Import via

.. code-block:: python

    from tlab import gmm
'''

import json
import logging
from collections import namedtuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import norm

from tlab.Util import tlConfigError, ParamSet, parse_ints, check_positive
from tlab.helpers import cluster
from tlab import telemetry


logger = logging.getLogger('tlab.gmm')

FLAT, ROUGH = cluster.LABELS
WEIGHT_CLIP = 1e-12
SWEEP_COLUMNS = ['window', 'mean_flat', 'std_flat', 'mean_rough', 'std_rough',
                 'accuracy']


class tlGMMError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


class GmmParams(ParamSet):
    '''EM settings and sweep windows ([gmm] config section).
    '''
    FIELDS = (
        ('windows',     parse_ints, (10, 20, 40, 70)),
        ('max_iter',    int,        500),
        ('tol',         float,      1e-8),
        ('sigma_floor', float,      1e-6),
        ('n_restarts',  int,        5),
        ('column',      str,        'sin_theta_x'),
    )

    def validate(self):
        if not self.windows or min(self.windows) < 2:
            raise tlConfigError("'windows' must be a list of integers >= 2")
        if int(self.max_iter) < 1:
            raise tlConfigError("'max_iter' must be >= 1")
        check_positive('tol', self.tol)
        check_positive('sigma_floor', self.sigma_floor)
        if int(self.n_restarts) < 0:
            raise tlConfigError("'n_restarts' must be >= 0")
        if self.column not in telemetry.CHANNELS:
            raise tlConfigError("'column' must be one of %s" %
                                ', '.join(telemetry.CHANNELS))
        return self


# =========================================================================
#  GMMMODEL -- Fitted mixture with its component -> terrain alignment.
# =========================================================================

class GmmModel(object):
    '''Two-component 1-D mixture.  `labels[i]` is the terrain of component
    i: the lower-mean component is flat.
    '''
    def __init__(self, weights, means, stds, loglik=float('nan'), n_iter=0,
                 window=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        self.loglik = float(loglik)
        self.n_iter = int(n_iter)
        self.window = window
        low = int(np.argmin(self.means)) if self.means[0] != self.means[1] else 0
        self.labels = [FLAT, ROUGH] if low == 0 else [ROUGH, FLAT]

    def component(self, label):
        ''' Index of the component aligned with `label`.
        '''
        return self.labels.index(label)

    def log_density(self, x):
        ''' Per-component log(pi_i * N(x; mu_i, sigma_i^2)), shape (n, 2).
        '''
        x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
        return np.log(self.weights) + norm.logpdf(x, self.means, self.stds)

    def to_dict(self):
        return dict(window=self.window,
                    weights=[float(v) for v in self.weights],
                    means=[float(v) for v in self.means],
                    stds=[float(v) for v in self.stds],
                    alignment=list(self.labels),
                    loglik=self.loglik,
                    n_iter=self.n_iter)

    def to_json(self, **extra):
        ''' JSON text of the model; `extra` keys are added verbatim.
        '''
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
            model = cls(d['weights'], d['means'], d['stds'], d['loglik'],
                        d['n_iter'], d.get('window'))
        except (ValueError, KeyError, TypeError) as e:
            raise tlGMMError("Cannot parse GMM model: %s" % e)
        if list(d.get('alignment', model.labels)) != model.labels:
            raise tlGMMError("Stored alignment %s contradicts the means %s" %
                             (d['alignment'], d['means']))
        return model

    def __repr__(self):
        return ('GmmModel(weights=%s, means=%s, stds=%s, loglik=%.6g, '
                'labels=%s)' % (self.weights, self.means, self.stds,
                                self.loglik, self.labels))


def _check_data(data):
    x = np.asarray(data, dtype=np.float64).ravel()
    if x.size < 4:
        raise tlGMMError("EM needs at least 4 data points, got %d" % x.size)
    if not np.all(np.isfinite(x)):
        raise tlGMMError("EM data must be finite")
    if np.any(x < 0):
        raise tlGMMError("EM data must be >= 0 (rolling std values)")
    if np.all(x == x[0]):
        raise tlGMMError("Degenerate input: all %d values equal %r" % (x.size, x[0]))
    return x


def _loglik(x, w, mu, sd):
    log_p = np.log(w) + norm.logpdf(x[:, None], mu, sd)
    row = logsumexp(log_p, axis=1)
    return float(row.sum()), log_p, row


def _floor(sd, sigma_floor):
    low = sd < sigma_floor
    if np.any(low):
        logger.debug("Component collapse: sigma %s re-floored to %g" %
                     (sd, sigma_floor))
        sd = np.where(low, sigma_floor, sd)
    return sd


def _em(x, w, mu, sd, max_iter, tol, sigma_floor):
    w = np.asarray(w, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sd = _floor(np.asarray(sd, dtype=np.float64), sigma_floor)
    ll, log_p, row = _loglik(x, w, mu, sd)
    trace = [ll]
    n_iter = 0
    for it in range(1, int(max_iter) + 1):
        resp = np.exp(log_p - row[:, None])
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            # An empty component keeps its parameters.
            nk = np.maximum(nk, np.finfo(float).tiny)
        w = np.clip(nk / x.size, WEIGHT_CLIP, 1.0 - WEIGHT_CLIP)
        w = w / w.sum()
        mu = (resp * x[:, None]).sum(axis=0) / nk
        var = (resp * (x[:, None] - mu) ** 2).sum(axis=0) / nk
        sd = _floor(np.sqrt(var), sigma_floor)

        new_ll, log_p, row = _loglik(x, w, mu, sd)
        trace.append(new_ll)
        n_iter = it
        if new_ll - ll < tol:
            ll = new_ll
            break
        ll = new_ll
    return w, mu, sd, ll, n_iter, trace


def percentile_init(x):
    '''Means at the 25th/75th percentiles, stds at half the pooled std,
    equal weights.'''
    mu = np.percentile(x, [25.0, 75.0])
    if mu[0] == mu[1]:
        mu = np.array([x.min(), x.max()])
    s = 0.5 * x.std()
    return np.array([0.5, 0.5]), mu, np.array([s, s])


def random_init(x, rng):
    '''Means at two distinct random data values.'''
    vals = np.unique(x)
    mu = np.sort(rng.choice(vals, size=2, replace=False))
    s = 0.5 * x.std()
    return np.array([0.5, 0.5]), mu, np.array([s, s])


# --------------------------------------------------------------------
# EM_FIT -- Fit the mixture by expectation-maximization.
#
def em_fit(data, init=None, max_iter=500, tol=1e-8, sigma_floor=1e-6,
           n_restarts=0, seed=0, window=None):
    '''Fit a two-component 1-D Gaussian mixture.

    Parameters
    ----------
    data : array-like
        Feature values, at least 4, finite and >= 0, not all equal.

    init : GmmModel, (weights, means, stds) or None
        Starting point; None uses percentile_init().

    max_iter : int
        Maximum EM iterations per start.

    tol : float
        Stop when the log-likelihood improves by less than this.

    sigma_floor : float
        Lower bound applied to both stds after every M-step.

    n_restarts : int
        Additional starts from seeded random_init(); the start with the
        best final log-likelihood wins.

    seed : int

    window : int or None
        Recorded on the model.

    Returns
    -------
    (GmmModel, trace)
        trace is the log-likelihood after every iteration of the winning
        start, trace[0] being the initial value.

    Raises
    ------
    tlGMMError
        On too few, non-finite, negative or identical data.
    '''
    x = _check_data(data)
    if init is None:
        starts = [percentile_init(x)]
    elif isinstance(init, GmmModel):
        starts = [(init.weights, init.means, init.stds)]
    else:
        starts = [tuple(np.asarray(v, dtype=np.float64) for v in init)]
    rng = np.random.default_rng(seed)
    starts.extend(random_init(x, rng) for _ in range(int(n_restarts)))

    best = None
    for i, (w, mu, sd) in enumerate(starts):
        fit = _em(x, w, mu, sd, max_iter, tol, sigma_floor)
        logger.debug("EM start %d: loglik %.10g after %d iterations" %
                     (i, fit[3], fit[4]))
        if best is None or fit[3] > best[3]:
            best = fit
    w, mu, sd, ll, n_iter, trace = best
    model = GmmModel(w, mu, sd, ll, n_iter, window)
    logger.info("GMM fit%s: means %s stds %s weights %s loglik %.6g" %
                ('' if window is None else ' (window %d)' % window,
                 np.round(mu, 5), np.round(sd, 5), np.round(w, 4), ll))
    return model, np.array(trace)


def responsibilities(model, x):
    '''Posterior component probabilities.

    Returns an (n, 2) array for array input and a (g1, g2) tuple for a
    scalar.  Rows sum to 1.
    '''
    scalar = np.ndim(x) == 0
    log_p = model.log_density(x)
    resp = np.exp(log_p - logsumexp(log_p, axis=1)[:, None])
    if scalar:
        return float(resp[0, 0]), float(resp[0, 1])
    return resp


def classify(model, values):
    '''Terrain label of each feature value.

    Argmax responsibility mapped through the alignment, ties going to
    flat.  Values at or below the flat mean are always flat and values
    at or above the rough mean always rough, so the rule is monotone in
    the feature.
    '''
    if isinstance(values, telemetry.FeatureSeries):
        values = values.values
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return np.array([], dtype=object)
    i_flat, i_rough = model.component(FLAT), model.component(ROUGH)
    log_p = model.log_density(x)
    rough = log_p[:, i_rough] > log_p[:, i_flat]
    rough = np.where(x <= model.means[i_flat], False, rough)
    rough = np.where(x >= model.means[i_rough], True, rough)
    return np.where(rough, ROUGH, FLAT).astype(object)


Evaluation = namedtuple('Evaluation', ['confusion', 'accuracy', 'recall'])


def evaluate(predictions, truth):
    '''Score predictions against ground-truth labels.

    Returns
    -------
    Evaluation(confusion, accuracy, recall)
        confusion is 2x2 in (flat, rough) order, accuracy the fraction
        trace/total (NaN when a class is missing from `truth`), recall a
        {label: value} dict.
    '''
    try:
        cm = cluster.confusion(truth, predictions)
        rec = cluster.recall(truth, predictions)
    except cluster.tlClusterError as e:
        raise tlGMMError(str(e))
    acc = cluster.accuracy(cm)
    if np.any(cm.sum(axis=1) == 0):
        acc = float('nan')
    return Evaluation(cm, acc, rec)


def separability(flat_values, rough_values):
    '''Fisher ratio (mu_r - mu_f)^2 / (var_f + var_r) of two feature sets.'''
    f = np.asarray(flat_values, dtype=np.float64)
    r = np.asarray(rough_values, dtype=np.float64)
    den = f.var() + r.var()
    if den == 0:
        return float('inf') if f.mean() != r.mean() else 0.0
    return float((r.mean() - f.mean()) ** 2 / den)


# --------------------------------------------------------------------
# WINDOW_SWEEP -- Fit, classify and score per window size.
#
SweepResult = namedtuple('SweepResult', ['window', 'model', 'features',
                                         'evaluation'])


def window_sweep(trajectories, windows=(10, 20, 40, 70), params=None,
                 column=None, stride=1, seed=0):
    '''Run the terrain classifier for every window size.

    Parameters
    ----------
    trajectories : list of DataFrame
        Collected trajectories (typically flat and rough).  Their
        `area` column is the ground truth.

    windows : sequence of int

    params : GmmParams or None

    column : str or None
        Channel to featurize, default params.column.

    stride : int

    seed : int

    Returns
    -------
    (results, table)
        results is a list of SweepResult (features carry a `predicted`
        column); table a DataFrame with SWEEP_COLUMNS.
    '''
    p = params if params is not None else GmmParams()
    column = column if column is not None else p.column
    trajectories = list(trajectories)
    if not trajectories:
        raise tlGMMError("window_sweep() needs at least one trajectory")
    w_max = max(windows)
    for t in trajectories:
        if len(t) < w_max:
            label = t['area'].iloc[0] if len(t) else 'empty'
            raise tlGMMError("Trajectory '%s' has %d rows, fewer than the "
                             "largest window %d" % (label, len(t), w_max))

    results, rows = [], []
    for w in windows:
        feats = pd.concat([telemetry.features(t, w, column, stride)
                           for t in trajectories], ignore_index=True)
        model, _ = em_fit(feats['std'].values, max_iter=p.max_iter, tol=p.tol,
                          sigma_floor=p.sigma_floor, n_restarts=p.n_restarts,
                          seed=seed, window=int(w))
        feats['predicted'] = classify(model, feats['std'].values)
        ev = evaluate(feats['predicted'].values, feats['area_label'].values)
        results.append(SweepResult(int(w), model, feats, ev))
        i_f, i_r = model.component(FLAT), model.component(ROUGH)
        rows.append(dict(window=int(w),
                         mean_flat=model.means[i_f], std_flat=model.stds[i_f],
                         mean_rough=model.means[i_r], std_rough=model.stds[i_r],
                         accuracy=ev.accuracy))
        logger.info("window %d: accuracy %s recall %s cluster accuracy %s" %
                    (w, ev.accuracy, ev.recall,
                     cluster.cluster_accuracy(feats['area_label'].values,
                                              feats['predicted'].values)))
    return results, pd.DataFrame(rows, columns=SWEEP_COLUMNS)
