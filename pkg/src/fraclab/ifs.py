"""Similitude iterated function systems and their (inhomogeneous) attractors.

Words are tuples of 1-based letters, so ``(1, 2)`` means phi_1 o phi_2.
Generated clouds are sorted by coordinates; the greedy routines of
:mod:`fraclab.metric_space` then run in their fast sorted mode.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetError, InputError
from .metric_space import FiniteMetricSpace, cloud_diameter

WORD_BUDGET = 10**6
LIP_TOL = 1e-12


@dataclass(frozen=True)
class Similitude:
    """x -> ratio * orthogonal @ x + translation."""

    ratio: float
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        O = np.atleast_2d(np.asarray(self.orthogonal, dtype=float))
        t = np.atleast_1d(np.asarray(self.translation, dtype=float))
        if not 0 < self.ratio < 1 and not (self.ratio == 1 and np.allclose(t, 0)):
            raise InputError(f"contraction ratio {self.ratio} not in (0, 1)")
        if O.shape != (len(t), len(t)):
            raise InputError("orthogonal part and translation disagree in dimension")
        if not np.allclose(O @ O.T, np.eye(len(t)), atol=1e-9):
            raise InputError("linear part is not orthogonal")
        object.__setattr__(self, "orthogonal", O)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, dim: int) -> "Similitude":
        return cls(1.0, np.eye(dim), np.zeros(dim))

    @classmethod
    def line(cls, ratio: float, shift: float, flip: bool = False) -> "Similitude":
        return cls(ratio, np.array([[-1.0 if flip else 1.0]]), np.array([shift]))

    @property
    def dim(self) -> int:
        return len(self.translation)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.ratio * x @ self.orthogonal.T + self.translation

    def then(self, inner: "Similitude") -> "Similitude":
        """The composition self o inner."""
        return Similitude(
            self.ratio * inner.ratio,
            self.orthogonal @ inner.orthogonal,
            self.ratio * self.orthogonal @ inner.translation + self.translation,
        )

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dim) - self.ratio * self.orthogonal, self.translation)

    def to_json_dict(self) -> dict:
        return {"ratio": self.ratio, "orthogonal": self.orthogonal.tolist(),
                "translation": self.translation.tolist()}


# --------------------------------------------------------------------------
# condensation sets


@dataclass(frozen=True)
class Condensation:
    """A compact condensation set described by a generator.

    kind is one of ``interval`` (lo, hi), ``points`` (explicit list),
    ``sequence34`` ({(1 + 1/(j+1)) 3^-j : j >= 1} with 0, optionally up to
    index J) or ``union`` (parts).  ``s_regular`` tags an s-regular set;
    intervals default to 1.
    """

    kind: str
    params: dict = field(default_factory=dict)
    s_regular: float | None = None

    def __post_init__(self):
        if self.kind not in ("interval", "points", "sequence34", "union"):
            raise InputError(f"unknown condensation kind {self.kind!r}")
        if self.kind == "interval" and not self.params["lo"] < self.params["hi"]:
            raise InputError("interval condensation needs lo < hi")
        if self.kind == "points" and len(self.params.get("points", [])) == 0:
            raise InputError("condensation must be nonempty")
        if self.kind == "interval" and self.s_regular is None:
            object.__setattr__(self, "s_regular", 1.0)

    @classmethod
    def interval(cls, lo, hi):
        return cls("interval", {"lo": float(lo), "hi": float(hi)})

    @classmethod
    def points(cls, pts):
        return cls("points", {"points": np.atleast_2d(np.asarray(pts, dtype=float).reshape(len(pts), -1)).tolist()})

    @classmethod
    def sequence34(cls, J=None):
        return cls("sequence34", {} if J is None else {"J": int(J)})

    @classmethod
    def union(cls, *parts):
        return cls("union", {"parts": list(parts)})

    @property
    def dim(self) -> int:
        if self.kind == "points":
            return len(self.params["points"][0])
        if self.kind == "union":
            return self.params["parts"][0].dim
        return 1

    def cloud(self, resolution: float) -> np.ndarray:
        """Finite sample of the set: every point of it lies within ``resolution``."""
        if not resolution > 0:
            raise InputError("resolution must be positive")
        if self.kind == "interval":
            lo, hi = self.params["lo"], self.params["hi"]
            m = int(math.ceil((hi - lo) / resolution)) + 1
            if m > WORD_BUDGET:
                raise BudgetError(f"interval sample of {m} points exceeds budget")
            return np.linspace(lo, hi, m)[:, None]
        if self.kind == "points":
            pts = np.asarray(self.params["points"], dtype=float)
            return _thin(pts, resolution)
        if self.kind == "sequence34":
            J = self.params.get("J")
            if J is None:
                J = max(1, int(math.ceil(math.log(2.0 / resolution) / math.log(3.0))) + 1)
            j = np.arange(1, J + 1, dtype=float)
            pts = np.concatenate([[0.0], (1.0 + 1.0 / (j + 1.0)) * 3.0 ** (-j)])
            return _thin(np.sort(pts)[:, None], resolution)
        parts = [p.cloud(resolution) for p in self.params["parts"]]
        return _thin(np.concatenate(parts), resolution)

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "union":
            out["parts"] = [p.to_json_dict() for p in self.params["parts"]]
        else:
            out.update(self.params)
        if self.s_regular is not None and not (self.kind == "interval" and self.s_regular == 1.0):
            out["s_regular"] = self.s_regular
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Condensation":
        kind = obj.get("kind")
        s = obj.get("s_regular")
        if kind == "interval":
            return cls("interval", {"lo": float(obj["lo"]), "hi": float(obj["hi"])}, s)
        if kind == "points":
            pts = np.asarray(obj["points"], dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            return cls("points", {"points": pts.tolist()}, s)
        if kind == "sequence34":
            return cls("sequence34", {"J": int(obj["J"])} if "J" in obj else {}, s)
        if kind == "union":
            return cls("union", {"parts": [cls.from_json_dict(p) for p in obj["parts"]]}, s)
        raise InputError(f"unknown condensation kind {kind!r}")


def _thin(pts: np.ndarray, resolution: float) -> np.ndarray:
    """Greedy resolution-net of a cloud, returned sorted by coordinates."""
    pts = pts[np.lexsort(pts.T[::-1])]
    if len(pts) < 2:
        return pts
    space = FiniteMetricSpace.from_points(pts, resolution_floor=resolution)
    from .metric_space import build_net

    return pts[build_net(space, resolution)]


# --------------------------------------------------------------------------
# the system


@dataclass(frozen=True)
class IfsSystem:
    maps: tuple
    condensation: Condensation | None = None
    open_set: np.ndarray | None = None  # vertices of a convex polytope, shape (m, d)

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) < 2:
            raise InputError("an IFS needs at least two maps")
        d = maps[0].dim
        if any(f.dim != d for f in maps):
            raise InputError("maps act on different dimensions")
        if any(not f.ratio < 1 for f in maps):
            raise InputError("every map must be a strict contraction")
        object.__setattr__(self, "maps", maps)
        if self.open_set is not None:
            V = np.atleast_2d(np.asarray(self.open_set, dtype=float))
            if V.shape[1] != d:
                raise InputError("open set vertices have the wrong dimension")
            object.__setattr__(self, "open_set", V)
        if self.condensation is not None and self.condensation.dim != d:
            raise InputError("condensation lives in a different dimension")

    @property
    def kappa(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    @property
    def ratios(self) -> np.ndarray:
        return np.array([f.ratio for f in self.maps])

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    def with_condensation(self, condensation) -> "IfsSystem":
        return IfsSystem(self.maps, condensation, self.open_set)

    def to_json_dict(self) -> dict:
        out = {"dim": self.dim, "maps": [f.to_json_dict() for f in self.maps]}
        if self.condensation is not None:
            out["condensation"] = self.condensation.to_json_dict()
        if self.open_set is not None:
            out["open_set"] = {"vertices": self.open_set.tolist()}
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "IfsSystem":
        try:
            maps = [Similitude(float(m["ratio"]), np.asarray(m["orthogonal"], dtype=float),
                               np.asarray(m["translation"], dtype=float)) for m in obj["maps"]]
        except KeyError as exc:
            raise InputError(f"map entry is missing field {exc}") from None
        cond = obj.get("condensation")
        cond = Condensation.from_json_dict(cond) if cond else None
        U = obj.get("open_set")
        U = np.asarray(U["vertices"], dtype=float) if U else None
        ifs = cls(tuple(maps), cond, U)
        if "dim" in obj and int(obj["dim"]) != ifs.dim:
            raise InputError(f"'dim' is {obj['dim']} but maps act on R^{ifs.dim}")
        return ifs

    @classmethod
    def load(cls, path) -> "IfsSystem":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def cantor_system(condensation=None) -> IfsSystem:
    """The middle-third Cantor maps x/3 and x/3 + 2/3 with U = (0, 1)."""
    return IfsSystem(
        (Similitude.line(1 / 3, 0.0), Similitude.line(1 / 3, 2 / 3)),
        condensation,
        np.array([[0.0], [1.0]]),
    )


# --------------------------------------------------------------------------
# words


def parse_word(text) -> tuple:
    """'12' or '1,2' or [1, 2] -> (1, 2)."""
    if isinstance(text, str):
        text = text.strip()
        if text in ("", "0", "-"):
            return ()
        parts = text.split(",") if "," in text else list(text)
        return tuple(int(p) for p in parts)
    return tuple(int(p) for p in text)


def _check_word(ifs: IfsSystem, word) -> tuple:
    word = tuple(int(i) for i in word)
    for i in word:
        if not 1 <= i <= ifs.kappa:
            raise InputError(f"letter {i} out of range 1..{ifs.kappa}")
    return word


def compose(ifs: IfsSystem, word) -> Similitude:
    """phi_w = phi_{w1} o ... o phi_{wn}; the empty word gives the identity."""
    word = _check_word(ifs, word)
    out = Similitude.identity(ifs.dim)
    for i in word:
        out = out.then(ifs.maps[i - 1])
    return out


def word_ratio(ifs: IfsSystem, word) -> float:
    return float(np.prod([ifs.maps[i - 1].ratio for i in _check_word(ifs, word)]))


def stopping_words(ifs: IfsSystem, rho: float, budget: int = WORD_BUDGET) -> list:
    """Words w with Lip(phi_w) <= rho < Lip(phi_{w-}), in lexicographic order."""
    if not 0 < rho < 1:
        raise InputError("rho must lie in (0, 1)")
    words, _ = _frontier(ifs, rho, budget, keep_interior=False)
    return words


def _frontier(ifs, rho, budget, keep_interior):
    """Depth-first enumeration of the stopping set N(rho).

    Returns (stopping words, interior words); interior words are those with
    Lip > rho, i.e. the strict prefixes, and are only collected on request.
    """
    ratios = ifs.ratios
    thr = rho * (1 + LIP_TOL)
    out, interior = [], []
    stack = [((), 1.0)]
    while stack:
        w, lip = stack.pop()
        if lip <= thr:
            out.append(w)
            if len(out) > budget:
                raise BudgetError(f"more than {budget} stopping words at rho={rho:g}")
            continue
        if keep_interior:
            interior.append(w)
            if len(interior) > budget:
                raise BudgetError(f"more than {budget} words above rho={rho:g}")
        for i in range(ifs.kappa, 0, -1):
            stack.append((w + (i,), lip * ratios[i - 1]))
    return out, interior


def similarity_dimension(ifs_or_ratios, tol: float = 1e-12) -> float:
    """Root s of sum_i ratio_i^s = 1 by bracketed bisection."""
    r = ifs_or_ratios.ratios if isinstance(ifs_or_ratios, IfsSystem) else np.asarray(ifs_or_ratios, float)
    if len(r) < 2 or np.any(r <= 0) or np.any(r >= 1):
        raise InputError("need at least two ratios in (0, 1)")
    logs = [math.log(x) for x in r]

    def excess(s):
        return math.fsum(math.exp(s * lg) for lg in logs) - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = excess(mid)
        if f == 0 or hi - lo <= 4 * math.ulp(mid):
            break
        if f > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    if abs(excess(s)) >= tol:
        # bisection has run out of floating point room; take the better endpoint
        s = min((lo, hi, s), key=lambda v: abs(excess(v)))
    return s


# --------------------------------------------------------------------------
# point clouds


def _apply_words(ifs: IfsSystem, words: list):
    """Ratios, orthogonal parts and translations of phi_w for many words at once."""
    d = ifs.dim
    m = len(words)
    ratio = np.ones(m)
    O = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    t = np.zeros((m, d))
    maxlen = max((len(w) for w in words), default=0)
    L = np.zeros((m, maxlen), dtype=np.int64)
    for a, w in enumerate(words):
        L[a, :len(w)] = w
    for pos in range(maxlen):
        for i, f in enumerate(ifs.maps, start=1):
            sel = L[:, pos] == i
            if not sel.any():
                continue
            # phi_{w i} = phi_w o phi_i
            t[sel] = t[sel] + ratio[sel, None] * np.einsum("mij,j->mi", O[sel], f.translation)
            O[sel] = O[sel] @ f.orthogonal
            ratio[sel] = ratio[sel] * f.ratio
    return ratio, O, t


@dataclass
class LabeledCloud:
    """A generated cloud with provenance for every point.

    ``word_id[i]`` indexes ``words``; ``kind[i]`` is 0 for attractor points
    and 1 for points of a condensation copy phi_w(C).
    """

    space: FiniteMetricSpace
    words: list
    word_id: np.ndarray
    kind: np.ndarray
    delta: float

    @property
    def points(self):
        return self.space.points


def _seed(ifs):
    return ifs.maps[0].fixed_point()


def _attractor(ifs, delta, budget):
    words = stopping_words(ifs, delta, budget)
    ratio, O, t = _apply_words(ifs, words)
    z = _seed(ifs)
    pts = ratio[:, None] * np.einsum("mij,j->mi", O, z) + t
    return words, pts


def attractor_points(ifs: IfsSystem, delta: float, budget: int = WORD_BUDGET) -> FiniteMetricSpace:
    """Images of the fixed point of phi_1 under every word of N(delta)."""
    return attractor_cloud(ifs, delta, budget).space


def attractor_cloud(ifs: IfsSystem, delta: float, budget: int = WORD_BUDGET) -> LabeledCloud:
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    words, pts = _attractor(ifs, delta, budget)
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    gaps = np.sqrt((np.diff(pts, axis=0) ** 2).sum(axis=1)) if ifs.dim == 1 else None
    if gaps is not None and len(gaps) and gaps.min() == 0:
        warnings.warn("attractor cloud has coincident points (min gap 0)", stacklevel=2)
    diam = cloud_diameter(pts)
    floor = delta * diam if diam > 0 else delta
    space = FiniteMetricSpace.from_points(pts, resolution_floor=floor)
    return LabeledCloud(space, words, order.astype(np.int64), np.zeros(len(pts), dtype=np.int8), delta)


def inhomogeneous_points(ifs: IfsSystem, delta: float, budget: int = WORD_BUDGET) -> FiniteMetricSpace:
    """Finite model of E_C = E  u  union_w phi_w(C) at resolution delta."""
    return inhomogeneous_cloud(ifs, delta, budget).space


def inhomogeneous_cloud(ifs: IfsSystem, delta: float, budget: int = WORD_BUDGET) -> LabeledCloud:
    """E_C at resolution delta with per-point provenance.

    Attractor points come from N(delta).  Every word w with Lip(phi_w) >= delta
    (the empty word included) contributes phi_w(C), with C sampled at
    resolution delta / Lip(phi_w) so the copy itself has resolution delta.
    Copies within delta/2 of an attractor point or of an earlier kept copy
    point are dropped.
    """
    if ifs.condensation is None:
        raise InputError("system has no condensation set")
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    e_words, e_pts = _attractor(ifs, delta, budget)
    # words with Lip >= delta: prefixes strictly above the stopping set, plus
    # stopping words whose ratio equals delta
    _, interior = _frontier(ifs, delta, budget, keep_interior=True)
    c_words = list(interior)
    e_ratio = _apply_words(ifs, e_words)[0]
    c_words += [w for w, lr in zip(e_words, e_ratio) if lr >= delta * (1 - LIP_TOL)]
    ratio, O, t = _apply_words(ifs, c_words)
    blocks, owners = [], []
    cache = {}
    total = 0
    for a in range(len(c_words)):
        res = delta / ratio[a]
        key = round(res, 12)
        if key not in cache:
            cache[key] = ifs.condensation.cloud(res)
        base = cache[key]
        total += len(base)
        if total > 20 * budget:
            raise BudgetError("condensation copies exceed the point budget")
        blocks.append(ratio[a] * base @ O[a].T + t[a])
        owners.append(np.full(len(base), a, dtype=np.int64))
    c_pts = np.concatenate(blocks)
    c_own = np.concatenate(owners)

    from scipy.spatial import cKDTree

    half = 0.5 * delta
    dE, _ = cKDTree(e_pts).query(c_pts, k=1)
    keep = dE > half
    c_pts, c_own = c_pts[keep], c_own[keep]
    order = np.lexsort(c_pts.T[::-1])
    c_pts, c_own = c_pts[order], c_own[order]
    if len(c_pts) > 1:
        from .metric_space import build_net

        sub = FiniteMetricSpace.from_points(c_pts, resolution_floor=half)
        kept = build_net(sub, half)
        c_pts, c_own = c_pts[kept], c_own[kept]

    pts = np.concatenate([e_pts, c_pts])
    words = list(e_words) + c_words
    word_id = np.concatenate([np.arange(len(e_words)), len(e_words) + c_own])
    kind = np.concatenate([np.zeros(len(e_pts), np.int8), np.ones(len(c_pts), np.int8)])
    order = np.lexsort(pts.T[::-1])
    pts, word_id, kind = pts[order], word_id[order], kind[order]
    diam = cloud_diameter(pts)
    space = FiniteMetricSpace.from_points(pts, resolution_floor=delta * diam)
    return LabeledCloud(space, words, word_id, kind, delta)


# --------------------------------------------------------------------------
# open set conditions

COSC_SAMPLES = 10**4


def check_cosc(ifs: IfsSystem, resolution: float | None = None, seed: int = 0) -> dict:
    """Check the (condensation) open set condition for a convex polytope U.

    (a) phi_i(U) subset U, tested on mapped vertices (exact for convex U).
    (b) the open images phi_i(U) are pairwise disjoint: separating axes in
        dimension <= 3, rejection sampling with ``COSC_SAMPLES`` points above.
    (c) the margin dist(C, union_i cl phi_i(U)  u  complement of U) is
        positive, evaluated on C sampled at ``resolution``.

    Returns a report dict; the verdicts are ``osc`` ((a) and (b)) and
    ``cosc`` (all three, None without a condensation set).
    """
    from . import _polytope as poly

    if ifs.open_set is None:
        raise InputError("check_cosc needs an open set U")
    V = ifs.open_set
    d = ifs.dim
    images = [f(V) for f in ifs.maps]
    tol = poly.GEOM_TOL * max(1.0, float(np.abs(V).max()))

    contain_margin = min(float(poly.depth_inside(V, im).min()) for im in images) + 0.0
    containment = contain_margin >= -tol

    method = "separating_axis" if d <= 3 else "probabilistic"
    gaps = []
    if d <= 3:
        for i in range(len(images)):
            for j in range(i + 1, len(images)):
                gaps.append(poly.separation_gap(images[i], images[j]))
        disjoint_margin = min(gaps) if gaps else np.inf
        disjoint = disjoint_margin >= -tol
    else:
        rng = np.random.default_rng(seed)
        disjoint = True
        disjoint_margin = None
        for i in range(len(images)):
            pts = poly.sample_in(images[i], COSC_SAMPLES, rng)
            for j in range(len(images)):
                if i != j and np.any(poly.depth_inside(images[j], pts) > tol):
                    disjoint = False
    touching = bool(disjoint and disjoint_margin is not None and abs(disjoint_margin) <= tol)

    report = {
        "dim": d,
        "containment": bool(containment),
        "containment_margin": contain_margin,
        "disjoint": bool(disjoint),
        "disjoint_margin": None if disjoint_margin is None else float(disjoint_margin),
        "disjoint_method": method,
        "closures_touch": touching,
        "osc": bool(containment and disjoint),
        "condensation_separated": None,
        "condensation_margin": None,
        "cosc": None,
    }
    if ifs.condensation is not None:
        diamU = cloud_diameter(V) if len(V) > 1 else 1.0
        res = resolution if resolution is not None else 1e-3 * diamU
        C = ifs.condensation.cloud(res)
        to_outside = poly.depth_inside(V, C)  # negative when outside U
        margin = float(max(0.0, to_outside.min())) + 0.0
        for im in images:
            if d == 1:
                lo, hi = im[:, 0].min(), im[:, 0].max()
                dist = np.maximum(np.maximum(lo - C[:, 0], C[:, 0] - hi), 0.0)
                margin = min(margin, float(dist.min()))
            else:
                margin = min(margin, min(poly.distance_to_hull(im, c) for c in C))
        report["condensation_margin"] = margin
        report["condensation_resolution"] = res
        report["condensation_separated"] = bool(margin > tol)
        report["cosc"] = bool(report["osc"] and report["condensation_separated"])
    return report
