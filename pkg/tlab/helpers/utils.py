"""Terrain Lab utility helper functions for reading and writing artifacts."""

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017' # yyyymmdd

# std lib
import os
import json
import logging
from functools import partial
from collections import OrderedDict

# 3rd party
import numpy as np
import pandas as pd


logger = logging.getLogger('tlab.helpers')

# Round-trip exact float text, so equal values always give equal files.
FLOAT_FORMAT = '%.17g'


def ensure_dir(path):

    """Create the parent directory of `path` if needed; returns `path`."""

    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d):
        os.makedirs(d)
    return path


def write_csv(df, path):

    """Write a DataFrame as CSV with a header row and no index.

    Floats are written with 17 significant digits so that a re-run with
    identical numbers produces a byte-identical file.
    """

    ensure_dir(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %s (%d rows)" % (path, len(df)))
    return path


def write_json(obj, path):

    """Write a dict (or ready-made JSON text) to `path`."""

    ensure_dir(path)
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2,
                                                       sort_keys=True)
    with open(path, 'w') as fd:
        fd.write(text)
        fd.write('\n')
    logger.info("Wrote %s" % path)
    return path


def _read_json(path):
    with open(path) as fd:
        return json.load(fd)


def _read_text(path):
    with open(path) as fd:
        return fd.read()


# map outfmt container types to a tuple:
# (file suffix, descriptive title, reader)
mapping = OrderedDict([
    ('pandas'     , ('.csv',  'Pandas dataframe',             pd.read_csv)),
    ('array'      , ('.csv',  'Numpy array',                  partial(np.loadtxt, skiprows=1, delimiter=',', ndmin=2))),
    ('structarray', ('.csv',  'Numpy structured array',       partial(np.genfromtxt, dtype=None, delimiter=',', names=True, encoding='utf-8'))),
    ('json'       , ('.json', 'Parsed JSON object',           _read_json)),
    ('string'     , (None,    'File contents as a string',    _read_text)),
    ('npz'        , ('.npz',  'Numpy archive',                partial(np.load, allow_pickle=False))),
])


def convert(path, outfmt=None, verbose=False, **kwargs):

    """Read the artifact at `path` into the structure named by `outfmt`.

    Parameters
    ----------
    path : str
        Artifact file.

    outfmt : str or None
        One of the keys of `mapping`:

          pandas - Pandas dataframe (default for .csv)
          array - Numpy array of the numeric columns
          structarray - Numpy structured array
          json - parsed JSON (default for .json)
          string - raw text
          npz - Numpy archive (default for .npz)

    verbose : bool
        If True, log the kind of structure returned.

    kwargs : optional params
        Passed to the reader.

    Example
    -------
    .. code-block:: python

       df = convert('out/sweep/sweep.csv')
       model = convert('out/sweep/gmm_w70.json')

    """

    if outfmt is None:
        suffix = os.path.splitext(path)[1].lower()
        outfmt = next((k for k, v in mapping.items() if v[0] == suffix), 'string')
    if outfmt not in mapping:
        raise ValueError("Unknown output format '%s', use one of %s" %
                         (outfmt, ', '.join(mapping)))

    output = mapping[outfmt][2](path, **kwargs)

    if verbose:
        logger.info("Returning %s" % mapping[outfmt][1])

    return output


def histogram_frame(groups, bins):

    """Histogram counts of several labelled samples on shared bins.

    Parameters
    ----------
    groups : OrderedDict {label: 1-d array}
        Samples to count; empty samples give zero counts.

    bins : int
        Number of equal-width bins over the pooled range.

    Returns
    -------
    df : DataFrame
        Columns bin_left, bin_right, then count_<label> per group.

    """

    pooled = np.concatenate([np.asarray(v, dtype=np.float64).ravel()
                             for v in groups.values()])
    if pooled.size == 0:
        raise ValueError("Cannot histogram empty samples")
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi <= lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, int(bins) + 1)
    df = pd.DataFrame({'bin_left': edges[:-1], 'bin_right': edges[1:]})
    for label, vals in groups.items():
        counts, _ = np.histogram(np.asarray(vals, dtype=np.float64), bins=edges)
        df['count_%s' % label] = counts
    return df
