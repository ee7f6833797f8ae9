"""Finite metric spaces, closed balls, greedy packings and nets.

A space is either a Euclidean point cloud or an explicit distance matrix.
All comparisons against a radius or separation use the same relative slack
``REL_TOL`` so that a point at distance exactly ``r`` lies in the closed ball
B(x, r) and is *not* r-separated from x, even after floating point rounding.
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InputError

REL_TOL = 1e-12
TRIANGLE_TOL = 1e-9


def _thr(r: float) -> float:
    return float(r) * (1.0 + REL_TOL)


def cloud_diameter(points: np.ndarray) -> float:
    """Euclidean diameter of a finite cloud (exact)."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return 0.0
    if points.shape[1] == 1:
        return float(np.ptp(points[:, 0]))
    cand = points
    if len(points) > 64:
        from scipy.spatial import ConvexHull, QhullError

        try:
            cand = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            cand = points
    best = 0.0
    for start in range(0, len(cand), 1024):
        block = cand[start:start + 1024]
        d2 = ((block[:, None, :] - cand[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


class FiniteMetricSpace:
    """A finite metric space given by coordinates or by a distance matrix.

    Parameters
    ----------
    points : array (n, d), optional
        Coordinates; distances are Euclidean.
    dist : array (n, n), optional
        Symmetric distance matrix, validated on construction.
    resolution_floor : float, optional
        Discretization scale below which the space does not represent the
        underlying set.  Defaults to the smallest positive distance.
    """

    def __init__(self, points=None, dist=None, resolution_floor=None):
        if (points is None) == (dist is None):
            raise InputError("give exactly one of points or dist")
        if points is not None:
            pts = np.array(points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2 or not np.all(np.isfinite(pts)):
                raise InputError("points must be a finite (n, d) array")
            pts.setflags(write=False)
            self.points = pts
            self.dist = None
            n = len(pts)
        else:
            D = np.array(dist, dtype=float)
            if D.ndim != 2 or D.shape[0] != D.shape[1]:
                raise InputError("dist must be a square matrix")
            _validate_distance_matrix(D)
            D.setflags(write=False)
            self.points = None
            self.dist = D
            n = len(D)
        if n < 2:
            raise InputError("a metric space needs at least two points")
        if resolution_floor is None:
            resolution_floor = self._min_positive_distance()
        if not resolution_floor > 0:
            raise InputError("resolution_floor must be positive")
        self.resolution_floor = float(resolution_floor)

    @classmethod
    def from_points(cls, points, resolution_floor=None):
        return cls(points=points, resolution_floor=resolution_floor)

    @classmethod
    def from_distance_matrix(cls, dist, resolution_floor=None):
        return cls(dist=dist, resolution_floor=resolution_floor)

    def __len__(self):
        return self.n

    @property
    def n(self) -> int:
        return len(self.points) if self.points is not None else len(self.dist)

    @property
    def dim(self):
        return None if self.points is None else self.points.shape[1]

    @cached_property
    def x_sorted(self) -> bool:
        return self.points is not None and bool(np.all(np.diff(self.points[:, 0]) >= 0))

    @cached_property
    def diam(self) -> float:
        if self.points is not None:
            return cloud_diameter(self.points)
        return float(self.dist.max())

    def _min_positive_distance(self) -> float:
        if self.dist is not None:
            pos = self.dist[self.dist > 0]
            return float(pos.min()) if len(pos) else 1.0
        from scipy.spatial import cKDTree

        d, _ = cKDTree(self.points).query(self.points, k=2)
        pos = d[:, 1][d[:, 1] > 0]
        return float(pos.min()) if len(pos) else 1.0

    def distances_from(self, i: int, subset=None) -> np.ndarray:
        self._check_index(i)
        if self.dist is not None:
            row = self.dist[i]
            return row if subset is None else row[subset]
        pts = self.points if subset is None else self.points[subset]
        return np.sqrt(((pts - self.points[i]) ** 2).sum(axis=1))

    def distance(self, i: int, j: int) -> float:
        self._check_index(j)
        return float(self.distances_from(i, np.array([j]))[0])

    def _check_index(self, i):
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self.n):
            raise InputError(f"point index {i!r} out of range [0, {self.n})")

    # -- serialization -------------------------------------------------
    def to_json_dict(self) -> dict:
        if self.points is not None:
            return {
                "dim": int(self.points.shape[1]),
                "points": self.points.tolist(),
                "resolution_floor": self.resolution_floor,
            }
        return {"n": self.n, "dist": self.dist.tolist(), "resolution_floor": self.resolution_floor}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FiniteMetricSpace":
        if "points" in obj:
            pts = np.asarray(obj["points"], dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if "dim" in obj and pts.shape[1] != int(obj["dim"]):
                raise InputError(f"'dim' is {obj['dim']} but points have {pts.shape[1]} coordinates")
            return cls(points=pts, resolution_floor=obj.get("resolution_floor"))
        if "dist" in obj:
            D = np.asarray(obj["dist"], dtype=float)
            if "n" in obj and len(D) != int(obj["n"]):
                raise InputError(f"'n' is {obj['n']} but dist has {len(D)} rows")
            return cls(dist=D, resolution_floor=obj.get("resolution_floor"))
        raise InputError("space JSON needs a 'points' or a 'dist' field")

    @classmethod
    def load(cls, path) -> "FiniteMetricSpace":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _validate_distance_matrix(D: np.ndarray) -> None:
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise InputError("distances must be finite and nonnegative")
    if np.any(np.abs(np.diag(D)) > 0):
        raise InputError("distance matrix must have a zero diagonal")
    if np.any(np.abs(D - D.T) > TRIANGLE_TOL):
        raise InputError("distance matrix must be symmetric")
    for k in range(len(D)):
        # d(i, j) <= d(i, k) + d(k, j) for all i, j
        if np.any(D > D[:, k:k + 1] + D[k:k + 1, :] + TRIANGLE_TOL):
            raise InputError(f"triangle inequality fails through point {k}")


def as_index_set(subset, n: int) -> np.ndarray:
    """Normalize ``subset`` to a strictly increasing int64 array within [0, n)."""
    idx = np.unique(np.asarray(subset, dtype=np.int64).ravel())
    if len(idx) and (idx[0] < 0 or idx[-1] >= n):
        raise InputError("subset indices out of range")
    return idx


def ball_members(space: FiniteMetricSpace, center: int, r: float) -> np.ndarray:
    """Indices of the closed ball B(center, r), ascending."""
    space._check_index(center)
    if r < 0:
        raise InputError("radius must be nonnegative")
    return np.flatnonzero(space.distances_from(center) <= _thr(r)).astype(np.int64)


def _greedy(space: FiniteMetricSpace, idx: np.ndarray, sep: float) -> np.ndarray:
    out = np.empty(len(idx), dtype=np.int64)
    if space.points is not None:
        k = _kernels.greedy_select(space.points, space.x_sorted, idx, len(idx), _thr(sep), out)
    else:
        k = _kernels.greedy_select_dist(space.dist, idx, len(idx), _thr(sep), out)
    return out[:k].copy()


def greedy_packing(space: FiniteMetricSpace, subset, r: float) -> np.ndarray:
    """Maximal subset of ``subset`` with pairwise distances strictly greater than r.

    Points are scanned in ascending index order and kept when they are
    r-separated from everything kept so far, so the result is also an r-net
    of ``subset``: each of its points lies within r of a kept point.
    """
    if not r > 0:
        raise InputError("packing radius must be positive")
    idx = as_index_set(subset, space.n)
    if len(idx) == 0:
        return idx
    return _greedy(space, idx, r)


def covering_count(space: FiniteMetricSpace, subset, r: float) -> int:
    """Size of the greedy r-net of ``subset``.

    This upper-bounds the least number of closed r-balls centred in the
    subset that cover it; it is not the exact covering number.
    """
    return len(greedy_packing(space, subset, r))


def build_net(space: FiniteMetricSpace, sep: float, seed_net=None) -> np.ndarray:
    """Maximal sep-separated set, greedy in ascending index order.

    With ``seed_net`` the result extends that (already sep-separated) set,
    which is how nested nets are grown.
    """
    if not sep > 0:
        raise InputError("separation must be positive")
    if seed_net is None or len(seed_net) == 0:
        return _greedy(space, np.arange(space.n, dtype=np.int64), sep)
    seed = as_index_set(seed_net, space.n)
    # points within sep of the seed are excluded before the greedy sweep
    near = np.zeros(space.n, dtype=bool)
    if space.points is not None:
        from scipy.spatial import cKDTree

        d, _ = cKDTree(space.points[seed]).query(space.points, k=1)
        near = d <= _thr(sep)
    else:
        near = (space.dist[:, seed] <= _thr(sep)).any(axis=1)
    rest = np.flatnonzero(~near).astype(np.int64)
    extra = _greedy(space, rest, sep) if len(rest) else rest
    return np.union1d(seed, extra)
