"""Nested cube decompositions of a finite metric space built from nested nets.

Level k uses the separation ``rho**k * scale`` with ``scale = diam``.  Net
points of level k+1 hang below their nearest level-k net point, and every
point of the space hangs below its nearest finest-level net point, so the
cubes are the ancestor closures of the points.  With this recipe each cube
Q_{k,j} satisfies

    B(x_{k,j}, c rho^k scale) subset Q_{k,j} subset B(x_{k,j}, C rho^k scale),
    c = 1/2 - rho/(1 - rho),  C = 1/(1 - rho),

and ``verify_tree`` measures how far a given tree is from these bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import InputError, ResolutionError
from .metric_space import REL_TOL, FiniteMetricSpace, _thr, ball_members, build_net


def c_const(rho: float) -> float:
    return 0.5 - rho / (1.0 - rho)


def C_const(rho: float) -> float:
    return 1.0 / (1.0 - rho)


@dataclass(frozen=True)
class CubeRef:
    level: int
    index: int


class CubeTree:
    """Cubes Q_{k,j} for k = 0..depth.

    Parameters
    ----------
    space : FiniteMetricSpace
    rho : float
    scale : float
        Length unit; level k has cube radius of order ``rho**k * scale``.
    centers : list of int arrays
        ``centers[k][j]`` is the point index x_{k,j}.
    parents : list of int arrays
        ``parents[k][j]`` is the level k-1 parent of cube (k, j); level 0
        holds -1.
    members : list of lists of int arrays
        ``members[k][j]`` are the point indices of Q_{k,j}.
    """

    def __init__(self, space, rho, scale, centers, parents, members):
        self.space = space
        self.rho = float(rho)
        self.scale = float(scale)
        self.centers = [np.asarray(c, dtype=np.int64) for c in centers]
        self.parents = [np.asarray(p, dtype=np.int64) for p in parents]
        self.members = [[np.asarray(m, dtype=np.int64) for m in lvl] for lvl in members]
        if not (len(self.centers) == len(self.parents) == len(self.members) >= 1):
            raise InputError("centers, parents and members need one entry per level")
        self.c_const = c_const(self.rho)
        self.C_const = C_const(self.rho)
        self._children = None
        self._labels = None

    @property
    def depth(self) -> int:
        return len(self.centers) - 1

    @property
    def levels(self) -> range:
        return range(len(self.centers))

    def n_cubes(self, k: int) -> int:
        return len(self.centers[k])

    def radius(self, k: int) -> float:
        return self.rho ** k * self.scale

    def children(self, k: int, j: int) -> np.ndarray:
        """Level k+1 indices of the children of cube (k, j)."""
        if self._children is None:
            self._children = []
            for lvl in range(self.depth):
                par = self.parents[lvl + 1]
                order = np.argsort(par, kind="stable")
                bounds = np.searchsorted(par[order], np.arange(self.n_cubes(lvl) + 1))
                self._children.append([order[bounds[i]:bounds[i + 1]] for i in range(self.n_cubes(lvl))])
        if k >= self.depth:
            return np.empty(0, dtype=np.int64)
        return self._children[k][j]

    def labels(self, k: int) -> np.ndarray:
        """Cube index of every point at level k (requires a partition)."""
        self._check_level(k)
        if self._labels is None:
            self._labels = {}
        if k not in self._labels:
            lab = np.full(self.space.n, -1, dtype=np.int64)
            for j, m in enumerate(self.members[k]):
                if np.any(lab[m] >= 0):
                    raise InputError(f"level {k} cubes overlap")
                lab[m] = j
            if np.any(lab < 0):
                raise InputError(f"level {k} cubes do not cover the space")
            self._labels[k] = lab
        return self._labels[k]

    def _check_level(self, k):
        if not (isinstance(k, (int, np.integer)) and 0 <= k <= self.depth):
            raise InputError(f"level {k!r} not in tree (0..{self.depth})")

    def to_json_dict(self) -> dict:
        return {
            "rho": self.rho,
            "scale": self.scale,
            "c_const": self.c_const,
            "C_const": self.C_const,
            "levels": [
                {
                    "k": k,
                    "centers": self.centers[k].tolist(),
                    "parents": self.parents[k].tolist(),
                    "members": [m.tolist() for m in self.members[k]],
                }
                for k in self.levels
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict, space: FiniteMetricSpace) -> "CubeTree":
        lv = obj["levels"]
        return cls(
            space,
            obj["rho"],
            obj["scale"],
            [l["centers"] for l in lv],
            [l["parents"] for l in lv],
            [l["members"] for l in lv],
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json_dict()))


def _nearest(space: FiniteMetricSpace, queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Position in ``targets`` of the nearest target to each query; ties to the smaller index."""
    if space.points is not None:
        from scipy.spatial import cKDTree

        tree = cKDTree(space.points[targets])
        kk = min(8, len(targets))
        d, pos = tree.query(space.points[queries], k=kk)
        if kk == 1:
            return pos.astype(np.int64)
        d = d.reshape(len(queries), kk)
        pos = pos.reshape(len(queries), kk)
        out = pos[:, 0].copy()
        tied = d[:, 1] <= d[:, 0] * (1 + REL_TOL)
        for q in np.flatnonzero(tied):
            # exact check so ties beyond the k returned neighbours are not missed
            dist = space.distances_from(int(queries[q]), targets)
            cand = np.flatnonzero(dist <= _thr(dist.min()))
            out[q] = cand[0]
        return out
    sub = space.dist[np.ix_(queries, targets)]
    mins = sub.min(axis=1, keepdims=True)
    return np.argmax(sub <= mins * (1 + REL_TOL), axis=1).astype(np.int64)


def build_cube_tree(space: FiniteMetricSpace, rho: float, depth: int) -> CubeTree:
    """Cube system with levels 0..depth and separation rho**k * diam at level k."""
    if not 0 < rho < 1.0 / 3.0:
        raise InputError("rho must lie in (0, 1/3)")
    if not (isinstance(depth, (int, np.integer)) and depth >= 0):
        raise InputError("depth must be a nonnegative integer")
    scale = space.diam
    if rho ** depth * scale < space.resolution_floor * (1 - REL_TOL):
        raise ResolutionError(
            f"level {depth} scale {rho ** depth * scale:.4g} is below the resolution floor "
            f"{space.resolution_floor:.4g}"
        )
    nets = []
    net = None
    for k in range(depth + 1):
        net = build_net(space, rho ** k * scale, seed_net=net)
        nets.append(net)
    # assignments between consecutive nets, then of every point to the finest net
    centers = [nets[0]]
    parents = [np.full(len(nets[0]), -1, dtype=np.int64)]
    for k in range(1, depth + 1):
        centers.append(nets[k])
        parents.append(_nearest(space, nets[k], nets[k - 1]))
    lab = _nearest(space, np.arange(space.n, dtype=np.int64), nets[depth])
    members = [None] * (depth + 1)
    for k in range(depth, -1, -1):
        members[k] = _split(lab, len(nets[k]))
        if k > 0:
            lab = parents[k][lab]
    return CubeTree(space, rho, scale, centers, parents, members)


def _split(lab: np.ndarray, m: int) -> List[np.ndarray]:
    order = np.argsort(lab, kind="stable")
    bounds = np.searchsorted(lab[order], np.arange(m + 1))
    return [order[bounds[j]:bounds[j + 1]].astype(np.int64) for j in range(m)]


def verify_tree(tree: CubeTree) -> dict:
    """Check the four cube properties; failures are reported, never raised.

    Returns
    -------
    dict
        ``partition``, ``nesting``, ``ball_sandwich``, ``chain`` booleans,
        the worst inner and outer radius ratios (in units of rho**k * scale),
        the violation counts and the chain's base point.
    """
    space = tree.space
    n = space.n
    c, C = tree.c_const, tree.C_const

    partition = True
    for k in tree.levels:
        allm = np.concatenate(tree.members[k]) if tree.members[k] else np.empty(0, np.int64)
        if len(allm) != n or len(np.unique(allm)) != n:
            partition = False

    nesting = True
    for k in range(1, tree.depth + 1):
        par = tree.parents[k]
        if np.any(par < 0) or np.any(par >= tree.n_cubes(k - 1)):
            nesting = False
            continue
        for j in range(tree.n_cubes(k - 1)):
            kids = np.flatnonzero(par == j)
            union = np.concatenate([tree.members[k][i] for i in kids]) if len(kids) else np.empty(0, np.int64)
            if len(union) != len(tree.members[k - 1][j]) or not np.array_equal(np.sort(union), np.sort(tree.members[k - 1][j])):
                nesting = False
                break

    worst_inner = np.inf
    worst_outer = 0.0
    violations = 0
    total = 0
    inner_ok = {}
    for k in tree.levels:
        unit = tree.radius(k)
        for j, mem in enumerate(tree.members[k]):
            x = int(tree.centers[k][j])
            d = space.distances_from(x)
            inside = np.zeros(n, dtype=bool)
            inside[mem] = True
            outer = float(d[mem].max()) / unit if len(mem) else 0.0
            out_d = d[~inside]
            inner = float(out_d.min()) / unit if len(out_d) else np.inf
            ok_in = inner > c * (1 + REL_TOL) or not len(out_d)
            ok_out = outer <= C * (1 + REL_TOL) and inside[x]
            inner_ok[(k, j)] = ok_in and inside[x]
            worst_inner = min(worst_inner, inner)
            worst_outer = max(worst_outer, outer)
            total += 1
            if not (ok_in and ok_out):
                violations += 1

    # chain property: one point whose cubes all contain B(x0, c rho^k scale)
    chain = False
    base = None
    x0 = int(tree.centers[0][0])
    if partition and nesting:
        chain = True
        for k in tree.levels:
            j = int(tree.labels(k)[x0])
            ball = ball_members(space, x0, c * tree.radius(k))
            if not np.all(np.isin(ball, tree.members[k][j])):
                chain = False
                break
        base = x0 if chain else None

    return {
        "partition": bool(partition),
        "nesting": bool(nesting),
        "ball_sandwich": violations == 0,
        "chain": bool(chain),
        "chain_point": base,
        "c_const": c,
        "C_const": C,
        "worst_inner_ratio": float(worst_inner) if np.isfinite(worst_inner) else None,
        "worst_outer_ratio": float(worst_outer),
        "sandwich_violations": int(violations),
        "cubes_checked": int(total),
        "depth": tree.depth,
        "rho": tree.rho,
    }


def cubes_meeting_ball(tree: CubeTree, level: int, center: int, r: float) -> List[CubeRef]:
    """Level-``level`` cubes with at least one member in the closed ball B(center, r)."""
    tree._check_level(level)
    ball = ball_members(tree.space, center, r)
    js = np.unique(tree.labels(level)[ball])
    return [CubeRef(int(level), int(j)) for j in js]
