"""Hot placement loops.

Each kernel exists twice: a scalar loop compiled with numba and a numpy
version that vectorizes over sites. Both return identical results (ties go to
the lowest site index). Set ``PQSCHED_DISABLE_NUMBA=1`` to force the numpy
path; it is also used when numba is not installed.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_DISABLED = os.environ.get("PQSCHED_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
USE_NUMBA = numba is not None and not _DISABLED


def _pipe_place_loop(order, W, V, P, BW, BV, tol):
    n = order.shape[0]
    d = W.shape[1]
    s = V.shape[1]
    assign = np.full(W.shape[0], -1, dtype=np.int64)
    for t in range(n):
        i = order[t]
        best = -1
        best_len = np.inf
        for j in range(P):
            fits = True
            for k in range(s):
                if BV[j, k] + V[i, k] > 1.0 + tol:
                    fits = False
                    break
            if not fits:
                continue
            length = 0.0
            for k in range(d):
                if BW[j, k] > length:
                    length = BW[j, k]
            if length < best_len:
                best_len = length
                best = j
        if best < 0:
            return assign, i
        assign[i] = best
        for k in range(d):
            BW[best, k] += W[i, k]
        for k in range(s):
            BV[best, k] += V[i, k]
    return assign, -1


def _lpt_loop(order, T, W, V, P, tol):
    d = W.shape[1]
    s = V.shape[1]
    site = np.full(T.shape[0], -1, dtype=np.int64)
    shelf = np.full(T.shape[0], -1, dtype=np.int64)
    closed = np.zeros(P)
    topT = np.zeros(P)
    topW = np.zeros((P, d))
    topV = np.zeros((P, s))
    nshelf = np.zeros(P, dtype=np.int64)
    for t in range(order.shape[0]):
        i = order[t]
        best = 0
        best_h = np.inf
        for j in range(P):
            h = topT[j]
            for k in range(d):
                if topW[j, k] > h:
                    h = topW[j, k]
            h += closed[j]
            if h < best_h:
                best_h = h
                best = j
        j = best
        fits = nshelf[j] > 0
        if fits:
            for k in range(s):
                if topV[j, k] + V[i, k] > 1.0 + tol:
                    fits = False
                    break
        if not fits:
            if nshelf[j] > 0:
                h = topT[j]
                for k in range(d):
                    if topW[j, k] > h:
                        h = topW[j, k]
                closed[j] += h
            topT[j] = 0.0
            for k in range(d):
                topW[j, k] = 0.0
            for k in range(s):
                topV[j, k] = 0.0
            nshelf[j] += 1
        if T[i] > topT[j]:
            topT[j] = T[i]
        for k in range(d):
            topW[j, k] += W[i, k]
        for k in range(s):
            topV[j, k] += V[i, k]
        site[i] = j
        shelf[i] = nshelf[j] - 1
    return site, shelf


def pipe_place_numpy(order, W, V, P, BW, BV, tol):
    assign = np.full(W.shape[0], -1, dtype=np.int64)
    for i in order:
        room = np.all(BV + V[i] <= 1.0 + tol, axis=1)
        if not room.any():
            return assign, int(i)
        lengths = np.where(room, BW.max(axis=1) if BW.shape[1] else 0.0, np.inf)
        j = int(np.argmin(lengths))
        assign[i] = j
        BW[j] += W[i]
        BV[j] += V[i]
    return assign, -1


def lpt_shelves_numpy(order, T, W, V, P, tol):
    d, s = W.shape[1], V.shape[1]
    site = np.full(T.shape[0], -1, dtype=np.int64)
    shelf = np.full(T.shape[0], -1, dtype=np.int64)
    closed = np.zeros(P)
    topT = np.zeros(P)
    topW = np.zeros((P, d))
    topV = np.zeros((P, s))
    nshelf = np.zeros(P, dtype=np.int64)
    for i in order:
        heights = closed + np.maximum(topT, topW.max(axis=1))
        j = int(np.argmin(heights))
        if nshelf[j] == 0 or np.any(topV[j] + V[i] > 1.0 + tol):
            if nshelf[j] > 0:
                closed[j] += max(topT[j], topW[j].max())
            topT[j] = 0.0
            topW[j] = 0.0
            topV[j] = 0.0
            nshelf[j] += 1
        topT[j] = max(topT[j], T[i])
        topW[j] += W[i]
        topV[j] += V[i]
        site[i] = j
        shelf[i] = nshelf[j] - 1
    return site, shelf


if numba is not None:
    pipe_place_numba = numba.njit(cache=True)(_pipe_place_loop)
    lpt_shelves_numba = numba.njit(cache=True)(_lpt_loop)
else:  # pragma: no cover
    pipe_place_numba = lpt_shelves_numba = None


def _prep(order, *arrays):
    out = [np.ascontiguousarray(order, dtype=np.int64)]
    out += [np.ascontiguousarray(a, dtype=np.float64) for a in arrays]
    return out


def pipe_place(order, W, V, P, init_BW=None, init_BV=None, tol=1e-9, use_numba=None):
    """Greedy pipeline placement.

    Clones are taken in ``order``; each goes to the site with the smallest
    work length among those whose demand still fits. Returns
    ``(assign, failed)`` where ``failed`` is the index of the first clone no
    site could host, or -1.
    """
    order, W, V = _prep(order, W, V)
    BW = np.zeros((P, W.shape[1])) if init_BW is None else np.array(init_BW, dtype=np.float64)
    BV = np.zeros((P, V.shape[1])) if init_BV is None else np.array(init_BV, dtype=np.float64)
    use = USE_NUMBA if use_numba is None else (use_numba and pipe_place_numba is not None)
    fn = pipe_place_numba if use else pipe_place_numpy
    assign, failed = fn(order, W, V, int(P), BW, BV, float(tol))
    return assign, int(failed)


def lpt_shelves(order, T, W, V, P, tol=1e-9, use_numba=None):
    """List placement onto the least-loaded site, Next-Fit into its top shelf.

    Returns per-clone ``(site, shelf)`` index arrays.
    """
    order, T, W, V = _prep(order, T, W, V)
    use = USE_NUMBA if use_numba is None else (use_numba and lpt_shelves_numba is not None)
    fn = lpt_shelves_numba if use else lpt_shelves_numpy
    return fn(order, T, W, V, int(P), float(tol))
