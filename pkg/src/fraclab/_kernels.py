"""Compiled inner loops for ball queries, greedy packings and ball masses.

Every kernel takes the coordinate array together with an ``x_sorted`` flag.
When the first coordinate is nondecreasing in index order, ball candidates
come from a binary search on that coordinate and greedy scans stop as soon
as the first-coordinate gap exceeds the separation.  Results are identical
either way; only the running time differs.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _sqdist(coords, i, j):
    s = 0.0
    for k in range(coords.shape[1]):
        t = coords[i, k] - coords[j, k]
        s += t * t
    return s


@njit(cache=True)
def ball_members(coords, x_sorted, center, radius, out):
    """Write the indices within ``radius`` of ``center`` into ``out``; return count."""
    n = coords.shape[0]
    lo = 0
    hi = n
    if x_sorted:
        xc = coords[center, 0]
        lo = np.searchsorted(coords[:, 0], xc - radius, side="left")
        hi = np.searchsorted(coords[:, 0], xc + radius, side="right")
    r2 = radius * radius
    m = 0
    for i in range(lo, hi):
        if _sqdist(coords, center, i) <= r2:
            out[m] = i
            m += 1
    return m


@njit(cache=True)
def greedy_select(coords, x_sorted, members, m, sep, selected):
    """Greedy ascending-order selection of points pairwise farther than ``sep``.

    ``members[:m]`` must be increasing.  Selected indices are written to
    ``selected``; the count is returned.
    """
    s2 = sep * sep
    k = 0
    for a in range(m):
        i = members[a]
        ok = True
        for b in range(k - 1, -1, -1):
            j = selected[b]
            if x_sorted and coords[i, 0] - coords[j, 0] > sep:
                break
            if _sqdist(coords, i, j) <= s2:
                ok = False
                break
        if ok:
            selected[k] = i
            k += 1
    return k


@njit(cache=True)
def greedy_select_dist(dist, members, m, sep, selected):
    k = 0
    for a in range(m):
        i = members[a]
        ok = True
        for b in range(k - 1, -1, -1):
            if dist[i, selected[b]] <= sep:
                ok = False
                break
        if ok:
            selected[k] = i
            k += 1
    return k


@njit(cache=True, parallel=True)
def packing_counts(coords, x_sorted, centers, big, small):
    """Greedy packing sizes of B(c, big[p]) at separation small[p].

    Returns an array of shape (len(centers), len(big)).
    """
    n = coords.shape[0]
    nc = centers.shape[0]
    npair = big.shape[0]
    out = np.zeros((nc, npair), dtype=np.int64)
    for a in prange(nc):
        members = np.empty(n, dtype=np.int64)
        selected = np.empty(n, dtype=np.int64)
        for p in range(npair):
            m = ball_members(coords, x_sorted, centers[a], big[p], members)
            out[a, p] = greedy_select(coords, x_sorted, members, m, small[p], selected)
    return out


@njit(cache=True, parallel=True)
def packing_counts_dist(dist, centers, big, small):
    n = dist.shape[0]
    nc = centers.shape[0]
    npair = big.shape[0]
    out = np.zeros((nc, npair), dtype=np.int64)
    for a in prange(nc):
        members = np.empty(n, dtype=np.int64)
        selected = np.empty(n, dtype=np.int64)
        for p in range(npair):
            m = 0
            c = centers[a]
            for i in range(n):
                if dist[c, i] <= big[p]:
                    members[m] = i
                    m += 1
            out[a, p] = greedy_select_dist(dist, members, m, small[p], selected)
    return out


@njit(cache=True, parallel=True)
def ball_masses(coords, x_sorted, centers, radii, labels, label_weights):
    """Total weight of the distinct labels met by each ball B(c, radii[q]).

    With one label per point this is the plain point-mass measure; with a
    label per finest cube it is the cube-level measure of the ball.
    """
    n = coords.shape[0]
    nc = centers.shape[0]
    nr = radii.shape[0]
    nl = label_weights.shape[0]
    out = np.zeros((nc, nr))
    for a in prange(nc):
        members = np.empty(n, dtype=np.int64)
        stamp = np.full(nl, -1, dtype=np.int64)
        for q in range(nr):
            m = ball_members(coords, x_sorted, centers[a], radii[q], members)
            tot = 0.0
            tag = a * nr + q
            for b in range(m):
                lab = labels[members[b]]
                if stamp[lab] != tag:
                    stamp[lab] = tag
                    tot += label_weights[lab]
            out[a, q] = tot
    return out


@njit(cache=True, parallel=True)
def ball_masses_dist(dist, centers, radii, labels, label_weights):
    n = dist.shape[0]
    nc = centers.shape[0]
    nr = radii.shape[0]
    nl = label_weights.shape[0]
    out = np.zeros((nc, nr))
    for a in prange(nc):
        stamp = np.full(nl, -1, dtype=np.int64)
        c = centers[a]
        for q in range(nr):
            tot = 0.0
            tag = a * nr + q
            for i in range(n):
                if dist[c, i] <= radii[q]:
                    lab = labels[i]
                    if stamp[lab] != tag:
                        stamp[lab] = tag
                        tot += label_weights[lab]
            out[a, q] = tot
    return out
