"""Terrain Lab helpers for scoring terrain clusters."""

__authors__ = 'Terrain Lab <terrainlab@users.noreply.github.com>'
__version__ = '20261017' # yyyymmdd

# 3rd party
import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import confusion_matrix, recall_score


# row/column order of every confusion matrix
LABELS = ('flat', 'rough')


class tlClusterError(Exception):
    '''A throwable error class.
    '''
    def __init__(self, message):
        self.message = message

    def __str__(self):
        return self.message


def _check_aligned(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise tlClusterError("Label sequences differ in length: %d vs %d" %
                             (y_true.size, y_pred.size))
    return y_true, y_pred


def confusion(y_true, y_pred, labels=LABELS):

    """2x2 confusion counts, rows = true class, columns = predicted class.

    Parameters
    ----------
    y_true, y_pred : seq of str
        Ground-truth and predicted terrain labels of equal length.

    labels : tuple
        Class order of rows and columns. Default: ('flat', 'rough').

    Returns
    -------
    cm : 2-d int array

    Example
    -------
    .. code-block:: python

       cm = confusion(['flat','rough'], ['flat','flat'])
       # array([[1, 0],
       #        [1, 0]])

    """

    y_true, y_pred = _check_aligned(y_true, y_pred)
    return confusion_matrix(y_true, y_pred, labels=list(labels))


def accuracy(cm):

    """Fraction of correctly classified samples, trace/total.
    NaN for an empty matrix."""

    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        return float('nan')
    return float(np.trace(cm)) / float(total)


def recall(y_true, y_pred, labels=LABELS):

    """Per-class recall as a dict {label: recall}.

    Classes absent from `y_true` get NaN instead of scikit-learn's
    zero-division warning.
    """

    y_true, y_pred = _check_aligned(y_true, y_pred)
    present = [l for l in labels if np.any(y_true == l)]
    out = dict((l, float('nan')) for l in labels)
    if present:
        vals = recall_score(y_true, y_pred, labels=present, average=None,
                            zero_division=0)
        out.update(zip(present, (float(v) for v in vals)))
    return out


def cluster_accuracy(y_true, y_pred):

    """Accuracy under the best one-to-one matching of cluster ids to
    classes (Hungarian assignment on the contingency table).

    Unlike accuracy(), this ignores which cluster was called which
    class, so it scores the clustering itself.
    """

    y_true, y_pred = _check_aligned(y_true, y_pred)
    if y_true.size == 0:
        return float('nan')
    classes, t = np.unique(y_true, return_inverse=True)
    clusters, p = np.unique(y_pred, return_inverse=True)
    D = max(classes.size, clusters.size)
    w = np.zeros((D, D), dtype=np.int64)
    np.add.at(w, (p, t), 1)
    rows, cols = linear_sum_assignment(w.max() - w)
    return float(w[rows, cols].sum()) / y_true.size


def confusion_frame(cm, labels=LABELS):

    """Confusion matrix as a DataFrame with columns
    (true, predicted_<label>, ...) for the CSV artifacts."""

    cm = np.asarray(cm)
    df = pd.DataFrame(cm, columns=['predicted_%s' % l for l in labels])
    df.insert(0, 'true', list(labels))
    return df
