"""Numpy fallback for the minimum-distance tables."""

import numpy as np


def min_dist_tables(X, x_off, P, p_off):
    """Minimum squared distances between object bags and prototype instances.

    Returns ``(inst, bag)``: ``inst[i, t]`` is the smallest distance from any
    instance of object bag ``i`` to prototype instance ``t``; ``bag[i, j]`` is
    the mean over bag ``i``'s instances of their smallest distance to
    prototype bag ``j``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    if X.shape[1] != P.shape[1]:
        raise ValueError("object and prototype instances differ in dimensionality")
    n_obj, n_proto = len(x_off) - 1, len(p_off) - 1
    inst = np.empty((n_obj, P.shape[0]))
    bag = np.empty((n_obj, n_proto))
    starts = np.asarray(p_off[:-1], dtype=np.intp)
    for i in range(n_obj):
        A = X[x_off[i]:x_off[i + 1]]
        s = np.zeros((A.shape[0], P.shape[0]))
        for f in range(X.shape[1]):  # feature-sequential sum, same order as the compiled kernel
            diff = A[:, f, None] - P[None, :, f]
            s += diff * diff
        inst[i] = s.min(axis=0)
        gmin = np.sort(np.minimum.reduceat(s, starts, axis=1), axis=0)
        bag[i] = np.add.accumulate(gmin, axis=0)[-1] / A.shape[0]
    return inst, bag
