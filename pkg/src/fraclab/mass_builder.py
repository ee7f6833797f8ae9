"""Mass distribution on a cube tree with a prescribed lower regularity exponent.

Every cube passes its mass to its children.  K = ceil(rho**-t) "central"
children, those meeting the ball B(x, lambda rho^k scale) around the parent's
centre, share most of it.  The rest get a small uniform share:

    plain:    eps = 1 / ((K + 1) * #children)
              central child: (1/(K+1) + eps) * parent,  other child: eps * parent
    doubling: eps = 1 / ((K + 1) * M) with M >= #children for every cube
              central child: (1/(K+1) + eps_c) * parent, eps_c fixed by conservation

Both keep every child at most rho**t times its parent; the doubling variant
also keeps every child at least eps times its parent.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .cube_tree import CubeTree
from .errors import CapacityError, FraclabError, InputError
from .metric_space import _thr, ball_members

LAMBDA = 1.0 / 8.0
CONSERVATION_TOL = 1e-12


@dataclass
class MassParams:
    """Exponents and constants of the construction.

    ``K`` is derived from the tree's rho when left as None; ``M`` is only used
    by the doubling variant (None means the largest child count in the tree).
    """

    t: float
    s: float
    c0: float = 1.0
    lam: float = LAMBDA
    K: Optional[int] = None
    M: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.t < self.s:
            raise InputError("need 0 < t < s")
        if not self.c0 > 0:
            raise InputError("c0 must be positive")
        if self.lam != LAMBDA:
            raise InputError("lambda is fixed at 1/8")
        if self.K is not None and self.K < 1:
            raise InputError("K must be >= 1")

    def K_for(self, rho: float) -> int:
        if self.K is not None:
            return int(self.K)
        return max(1, math.ceil(rho ** (-self.t) * (1 - 1e-12)))


def rho_bounds(s: float, t: float, c0: float) -> dict:
    lam = LAMBDA
    return {
        "cap": 1.0 / 64.0,
        "geometry": math.sqrt(2.0) - 1.25,
        "capacity": (c0 * 2.0 ** (-s) * lam ** s) ** (1.0 / (s - t)),
    }


def choose_rho(s: float, t: float, c0: float = 1.0) -> float:
    """Largest rho = 2**-m strictly below every bound needed by the construction."""
    if not 0 < t < s:
        raise InputError("need 0 < t < s")
    if not c0 > 0:
        raise InputError("c0 must be positive")
    bound = min(rho_bounds(s, t, c0).values())
    m = max(0, math.floor(-math.log2(bound)))
    while 2.0 ** (-m) >= bound:
        m += 1
    return 2.0 ** (-m)


def check_rho_inequalities(rho: float, s: float, t: float, c0: float = 1.0) -> dict:
    """Evaluate the three inequalities choose_rho is meant to guarantee."""
    C = 1.0 / (1.0 - rho)
    lam = LAMBDA
    return {
        "separation": rho ** 2 + 2 * C * rho < 1,
        "containment": (2 * C + 4) * rho + (lam - 1.0 / 8.0) < 8 * rho,
        "capacity": c0 * C ** (-s) * lam ** s * rho ** (-s) >= rho ** (-t),
    }


class MassDistribution:
    """Cube weights; ``weights[k][j]`` is the mass of Q_{k,j} (root mass 1)."""

    def __init__(self, tree: CubeTree, weights, variant: str, params: Optional[MassParams] = None,
                 K: Optional[int] = None, eps: Optional[float] = None):
        self.tree = tree
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.variant = variant
        self.params = params
        self.K = K
        self.eps = eps

    @property
    def finest_weights(self) -> np.ndarray:
        return self.weights[-1]

    def mass_view(self):
        t = self.tree
        return t.space, t.labels(t.depth), self.finest_weights

    def check(self) -> dict:
        """Conservation, positivity and per-edge bounds, all exact."""
        t = self.tree
        rho_t = t.rho ** self.params.t if self.params else None
        worst_cons = 0.0
        worst_decay = 0.0
        worst_floor = np.inf
        for k in range(t.depth):
            par = t.parents[k + 1]
            sums = np.bincount(par, weights=self.weights[k + 1], minlength=t.n_cubes(k))
            rel = np.abs(sums - self.weights[k]) / self.weights[k]
            worst_cons = max(worst_cons, float(rel.max()))
            ratio = self.weights[k + 1] / self.weights[k][par]
            worst_decay = max(worst_decay, float(ratio.max()))
            worst_floor = min(worst_floor, float(ratio.min()))
        positive = all(bool(np.all(w > 0)) for w in self.weights)
        out = {
            "conservation_max_rel_error": worst_cons,
            "conservation": worst_cons <= CONSERVATION_TOL,
            "positive": positive,
            "max_child_ratio": worst_decay,
            "min_child_ratio": worst_floor if np.isfinite(worst_floor) else None,
        }
        if rho_t is not None:
            out["rho_t"] = rho_t
            out["decay_bound"] = worst_decay <= rho_t * (1 + CONSERVATION_TOL)
        if self.variant == "doubling" and self.eps is not None:
            out["eps"] = self.eps
            out["floor_bound"] = worst_floor >= self.eps * (1 - CONSERVATION_TOL)
        return out

    def to_json_dict(self) -> dict:
        t = self.tree
        return {
            "variant": self.variant,
            "rho": t.rho,
            "K": self.K,
            "eps": self.eps,
            "params": None if self.params is None else {
                "t": self.params.t, "s": self.params.s, "c0": self.params.c0,
                "lambda": self.params.lam, "M": self.params.M,
            },
            "levels": [
                {"k": k, "centers": t.centers[k].tolist(), "parents": t.parents[k].tolist(),
                 "weights": self.weights[k].tolist()}
                for k in t.levels
            ],
            "finest_labels": t.labels(t.depth).tolist(),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json_dict()))


def _central_children(tree: CubeTree, k: int, j: int, lam: float) -> tuple:
    """All children of (k, j), and those meeting B(x_{k,j}, lam rho^k scale) ordered by centre distance."""
    kids = tree.children(k, j)
    x = int(tree.centers[k][j])
    ball = ball_members(tree.space, x, lam * tree.radius(k))
    lab = tree.labels(k + 1)
    meeting = np.unique(lab[ball])
    meeting = meeting[np.isin(meeting, kids)]
    d = tree.space.distances_from(x, tree.centers[k + 1][meeting])
    order = np.lexsort((meeting, d))
    return kids, meeting[order]


def _build(tree: CubeTree, params: MassParams, doubling: bool) -> MassDistribution:
    K = params.K_for(tree.rho)
    M = None
    if doubling:
        counts = [len(tree.children(k, j)) for k in range(tree.depth) for j in range(tree.n_cubes(k))]
        observed = max(counts) if counts else 1
        M = params.M if params.M is not None else observed
        if M < observed:
            raise InputError(f"M = {M} is below the largest child count {observed}")
    weights = [np.ones(1)]
    for k in range(1, tree.depth + 1):
        weights.append(np.zeros(tree.n_cubes(k)))
    eps_doubling = 1.0 / ((K + 1) * M) if doubling else None
    for k in range(tree.depth):
        for j in range(tree.n_cubes(k)):
            kids, central = _central_children(tree, k, j, params.lam)
            if len(central) < K:
                raise CapacityError(
                    f"cube ({k}, {j}) has {len(central)} children near its centre, needs K = {K}",
                    cube=[k, j], available=int(len(central)), needed=K,
                )
            chosen = central[:K]
            parent = weights[k][j]
            n_kids = len(kids)
            if doubling:
                eps = eps_doubling
                eps_c = (1.0 / (K + 1) - (n_kids - K) * eps) / K
                if not eps_c > 0:
                    raise FraclabError(f"internal: nonpositive central share at cube ({k}, {j})")
            else:
                eps = 1.0 / ((K + 1) * n_kids)
                eps_c = eps
            weights[k + 1][kids] = eps * parent
            weights[k + 1][chosen] = (1.0 / (K + 1) + eps_c) * parent
    return MassDistribution(tree, weights, "doubling" if doubling else "plain", params, K=K, eps=eps_doubling)


def build_mass(tree: CubeTree, params: MassParams) -> MassDistribution:
    """Plain construction; raises CapacityError when a cube has fewer than K central children."""
    return _build(tree, params, doubling=False)


def build_mass_doubling(tree: CubeTree, params: MassParams) -> MassDistribution:
    return _build(tree, params, doubling=True)


def measure_of_ball(mass: MassDistribution, center: int, r: float) -> float:
    """Total weight of the finest cubes that meet B(center, r)."""
    tree = mass.tree
    finest = tree.radius(tree.depth)
    if r < finest * tree.c_const:
        warnings.warn("radius below the finest cube scale; returning the containing cube's weight", stacklevel=2)
    ball = ball_members(tree.space, center, r)
    cubes = np.unique(tree.labels(tree.depth)[ball])
    return float(mass.finest_weights[cubes].sum())


def max_child_count(tree: CubeTree) -> int:
    return max((len(tree.children(k, j)) for k in range(tree.depth) for j in range(tree.n_cubes(k))), default=1)


__all__ = [
    "LAMBDA", "MassParams", "MassDistribution", "choose_rho", "check_rho_inequalities",
    "build_mass", "build_mass_doubling", "measure_of_ball", "max_child_count", "rho_bounds",
]
