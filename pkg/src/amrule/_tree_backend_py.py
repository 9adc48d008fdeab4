"""Pure-numpy tree kernels; fallback when the compiled core is unavailable.

The split scan and the compiled version in _tree_core.pyx must stay
arithmetically identical (same operations in the same order on float64), so
that either backend grows the exact same trees.  Squares are spelled x*x,
not x**2, to pin the instruction sequence.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def scan_feature(vals: np.ndarray, cls: np.ndarray) -> tuple[float, float, int]:
    """Best Gini split of one feature column.

    ``vals`` is sorted ascending (missing cells arrive as the 0.0
    placeholder, so presence/absence is itself splittable) and ``cls`` holds
    the class index (0/1) of each row in the same order.  Returns
    (gain, threshold, n_left); gain <= 0 means "do not split here".
    """
    np_f = len(vals)
    if np_f < 2:
        return -1.0, 0.0, 0
    boundaries = np.flatnonzero(vals[:-1] != vals[1:])
    if boundaries.size == 0:
        return -1.0, 0.0, 0
    total1 = int(cls.sum())
    total0 = np_f - total1
    np_d = float(np_f)

    c1 = np.cumsum(cls)
    n_l = (boundaries + 1).astype(np.float64)
    p1_l = c1[boundaries].astype(np.float64)
    p0_l = n_l - p1_l
    n_r = np_d - n_l
    p1_r = float(total1) - p1_l
    p0_r = n_r - p1_r

    a = p0_l / n_l
    b = p1_l / n_l
    gl = 1.0 - a * a - b * b
    a = p0_r / n_r
    b = p1_r / n_r
    gr = 1.0 - a * a - b * b
    child = (n_l * gl + n_r * gr) / np_d

    a0 = float(total0) / np_d
    a1 = float(total1) / np_d
    gparent = 1.0 - a0 * a0 - a1 * a1
    gain = gparent - child

    best = int(np.argmax(gain))
    i = int(boundaries[best])
    threshold = (vals[i] + vals[i + 1]) / 2.0
    return float(gain[best]), float(threshold), i + 1


def predict_classes(feature, threshold, left, right, leaf_label, X):
    """Route every row of X to a leaf and return its class index."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    while True:
        pending = np.flatnonzero(feature[node] >= 0)
        if pending.size == 0:
            break
        cur = node[pending]
        go_left = X[pending, feature[cur]] <= threshold[cur]
        node[pending] = np.where(go_left, left[cur], right[cur])
    return leaf_label[node]
