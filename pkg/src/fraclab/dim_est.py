"""Multiscale estimators for Assouad, lower and regularity dimensions.

A sweep evaluates a scale-pair statistic over balls B(x, R) for sampled
centres x and a geometric grid of radii, keeping only pairs with
``guard * resolution_floor <= r < R <= diam``:

* sets: log N(B(x, R), r) with N a greedy packing count (separation r for
  upper modes, 2r for lower modes, bracketing the covering number);
* measures: log mu(B(x, R)) / mu(B(x, r)).

Two reductions turn the sweep into an exponent.

``"extreme"``
    sup (upper modes) or inf (lower modes) of statistic / log(R/r).  This
    is the literal finite-sweep version of the definitions.  It is exact
    but the unknown constant in N <= C (R/r)^s dominates at small ratios,
    so on desk-sized clouds it mostly measures that constant.
``"envelope"`` (default)
    For every ratio Lambda = R/r on the grid take the max (or min) of the
    statistic over all centres and outer radii, then fit a line in
    log Lambda by least absolute deviations.  The slope is the exponent and
    the intercept is the constant, so the two are separated rather than
    conflated.  The L1 fit ignores the one or two ratio levels where an
    isolated point first gets swallowed by a large ball.  Only ratios inside
    ``ratio_window`` are used.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateInputError, InputError, ResolutionError
from .metric_space import REL_TOL, FiniteMetricSpace

MODES = ("assouad", "lower", "upper_reg", "lower_reg")
_UPPER = {"assouad": True, "lower": False, "upper_reg": True, "lower_reg": False}
SET_WINDOW = (4.0, 128.0)
MEASURE_WINDOW = (4.0, math.inf)
MODE_ALIASES = {"uppereg": "upper_reg", "upperreg": "upper_reg", "lowreg": "lower_reg", "lowerreg": "lower_reg"}


@dataclass
class SweepConfig:
    """Parameters of a scale sweep.

    Attributes
    ----------
    centers : int or "all"
        Maximum number of ball centres.  With an integer, all points are
        used when the space is no larger, otherwise a seeded uniform sample.
    ratio_grid : sequence of (r, R), optional
        Explicit scale pairs.  When omitted the pairs come from the
        geometric grid ``diam * grid_factor**-k``.
    guard : float
        Pairs with r below ``guard * resolution_floor`` are discarded.
    seed : int
        Seed of the centre sample.
    grid_factor : float
        Step of the geometric radius grid.
    ratio_window : (float, float), optional
        Range of R/r kept on the generated grid.  The default is
        ``SET_WINDOW`` for packing counts and ``MEASURE_WINDOW`` for
        measures, whose structure is only visible across several levels.
    reduction : {"envelope", "extreme"}
    min_radii : int, optional
        A ratio level of the generated grid is kept only if it is realized
        by at least this many outer radii; the top levels otherwise consist
        of balls that swallow the whole space.  Defaults to 5 for packing
        counts and 3 for measures.
    """

    centers: object = 2000
    ratio_grid: Optional[Sequence] = None
    guard: float = 10.0
    seed: int = 0
    grid_factor: float = math.sqrt(2.0)
    ratio_window: Optional[tuple] = None
    reduction: str = "envelope"
    min_radii: Optional[int] = None

    def __post_init__(self):
        if not self.guard >= 1:
            raise InputError("guard must be >= 1")
        if not self.grid_factor > 1:
            raise InputError("grid_factor must exceed 1")
        if self.ratio_window is not None:
            lo, hi = self.ratio_window
            if not 1 <= lo < hi:
                raise InputError("ratio_window must satisfy 1 <= lo < hi")
        if self.min_radii is not None and not self.min_radii >= 1:
            raise InputError("min_radii must be >= 1")
        if self.reduction not in ("envelope", "extreme"):
            raise InputError(f"unknown reduction {self.reduction!r}")
        if self.centers != "all" and not (isinstance(self.centers, (int, np.integer)) and self.centers >= 1):
            raise InputError("centers must be a positive integer or 'all'")
        if self.ratio_grid is not None:
            for r, R in self.ratio_grid:
                if not 0 < r < R:
                    raise InputError(f"ratio_grid pair ({r}, {R}) needs 0 < r < R")

    def to_json_dict(self) -> dict:
        return {
            "centers": self.centers if self.centers == "all" else int(self.centers),
            "ratio_grid": None if self.ratio_grid is None else [[float(r), float(R)] for r, R in self.ratio_grid],
            "guard": float(self.guard),
            "seed": int(self.seed),
            "grid_factor": float(self.grid_factor),
            "ratio_window": None if self.ratio_window is None else [float(v) for v in self.ratio_window],
            "reduction": self.reduction,
            "min_radii": None if self.min_radii is None else int(self.min_radii),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SweepConfig":
        obj = dict(obj)
        if obj.get("ratio_window") is not None:
            obj["ratio_window"] = tuple(float(v) for v in obj["ratio_window"])
        return cls(**obj)


@dataclass
class Sweep:
    """Raw sweep values; one row per (centre, pair)."""

    centers: np.ndarray
    r: np.ndarray
    R: np.ndarray
    values: np.ndarray  # shape (ncenters, npairs)
    mu_r: Optional[np.ndarray] = None
    mu_R: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None

    @property
    def log_ratio(self) -> np.ndarray:
        return np.log(self.R / self.r)

    def exponents(self) -> np.ndarray:
        return self.values / self.log_ratio[None, :]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        exps = self.exponents()
        if self.mu_r is not None:
            w.writerow(["x_index", "r", "R", "mu_r", "mu_R", "log_ratio_exponent"])
        else:
            w.writerow(["x_index", "r", "R", "count", "log_ratio_exponent"])
        for a, c in enumerate(self.centers):
            for p in range(len(self.r)):
                row = [int(c), _g(self.r[p]), _g(self.R[p])]
                if self.mu_r is not None:
                    row += [_g(self.mu_r[a, p]), _g(self.mu_R[a, p])]
                else:
                    row.append(int(self.counts[a, p]))
                row.append(_g(exps[a, p]))
                w.writerow(row)
        return buf.getvalue()


def _g(v) -> str:
    return format(float(v), ".12g")


@dataclass
class DimEstimate:
    exponent: float
    constant: float
    witness: tuple  # (center index, r, R)
    mode: str
    reduction: str
    n_pairs: int
    n_centers: int
    sweep: Optional[Sweep] = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        c, r, R = self.witness
        return {
            "mode": self.mode,
            "exponent": float(self.exponent),
            "constant": float(self.constant),
            "witness": {"center": int(c), "r": float(r), "R": float(R)},
            "reduction": self.reduction,
            "n_pairs": int(self.n_pairs),
            "n_centers": int(self.n_centers),
        }


# -- sweep construction ----------------------------------------------------

def sample_centers(n: int, config: SweepConfig) -> np.ndarray:
    if config.centers == "all" or n <= int(config.centers):
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    return np.sort(rng.choice(n, size=int(config.centers), replace=False)).astype(np.int64)


def scale_pairs(space: FiniteMetricSpace, config: SweepConfig, window=SET_WINDOW, min_radii=5):
    """Admissible (r, R) pairs, sorted by R descending then r descending.

    ``window`` and ``min_radii`` apply when the config leaves them unset.
    """
    if config.min_radii is not None:
        min_radii = config.min_radii
    diam = space.diam
    rmin = config.guard * space.resolution_floor
    if config.ratio_grid is not None:
        pairs = [(float(r), float(R)) for r, R in config.ratio_grid if r >= rmin * (1 - REL_TOL) and R <= diam * (1 + REL_TOL)]
    else:
        q = config.grid_factor
        scales = []
        k = 1
        while True:
            s = diam * q ** (-k)
            if s < rmin * (1 - REL_TOL):
                break
            scales.append(s)
            k += 1
        lo, hi = config.ratio_window if config.ratio_window is not None else window
        pairs = []
        for m in range(1, len(scales)):
            lam = q ** m
            if not lo * (1 - 1e-9) <= lam <= hi * (1 + 1e-9):
                continue
            level = [(scales[i + m], scales[i]) for i in range(len(scales) - m)]
            if len(level) >= min_radii:
                pairs.extend(level)
    if not pairs:
        raise ResolutionError(
            f"no admissible scale pairs: need guard*floor = {rmin:.3g} <= r < R <= diam = {diam:.3g}"
        )
    pairs.sort(key=lambda p: (-p[1], -p[0]))
    r = np.array([p[0] for p in pairs])
    R = np.array([p[1] for p in pairs])
    return r, R


def count_sweep(space: FiniteMetricSpace, config: SweepConfig, sep_factor: float) -> Sweep:
    """log of greedy packing counts of B(x, R) at separation sep_factor * r."""
    r, R = scale_pairs(space, config)
    centers = sample_centers(space.n, config)
    big = R * (1 + REL_TOL)
    small = sep_factor * r * (1 + REL_TOL)
    if space.points is not None:
        counts = _kernels.packing_counts(space.points, space.x_sorted, centers, big, small)
    else:
        counts = _kernels.packing_counts_dist(space.dist, centers, big, small)
    return Sweep(centers=centers, r=r, R=R, values=np.log(counts), counts=counts)


def _mass_view(measure):
    """(space, labels, label_weights) for any supported measure input."""
    if hasattr(measure, "mass_view"):
        return measure.mass_view()
    if isinstance(measure, tuple) and len(measure) == 2:
        return WeightedSpace(*measure).mass_view()
    raise InputError("measure must be a MassDistribution, a WeightedSpace or a (space, weights) tuple")


@dataclass
class WeightedSpace:
    """Point masses ``weights[i]`` at the points of ``space``."""

    space: FiniteMetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(w) != self.space.n:
            raise InputError(f"{len(w)} weights for {self.space.n} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InputError("weights must be finite and nonnegative")
        self.weights = w

    def mass_view(self):
        return self.space, np.arange(self.space.n, dtype=np.int64), self.weights


@dataclass
class LabeledMass:
    """Weights on groups of points; a ball's mass is the total weight of the groups it meets."""

    space: FiniteMetricSpace
    labels: np.ndarray
    label_weights: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        self.label_weights = np.asarray(self.label_weights, dtype=float).ravel()
        if len(self.labels) != self.space.n:
            raise InputError(f"{len(self.labels)} labels for {self.space.n} points")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.label_weights)):
            raise InputError("labels must index label_weights")
        if not np.all(np.isfinite(self.label_weights)) or np.any(self.label_weights < 0):
            raise InputError("weights must be finite and nonnegative")

    def mass_view(self):
        return self.space, self.labels, self.label_weights


def ball_mass_table(space, labels, label_weights, centers, radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float) * (1 + REL_TOL)
    if space.points is not None:
        return _kernels.ball_masses(space.points, space.x_sorted, centers, radii, labels, label_weights)
    return _kernels.ball_masses_dist(space.dist, centers, radii, labels, label_weights)


def mass_sweep(measure, config: SweepConfig) -> Sweep:
    space, labels, weights = _mass_view(measure)
    r, R = scale_pairs(space, config, MEASURE_WINDOW, min_radii=3)
    centers = sample_centers(space.n, config)
    radii, inv = np.unique(np.concatenate([r, R]), return_inverse=True)
    table = ball_mass_table(space, labels, weights, centers, radii)
    mu_r = table[:, inv[: len(r)]]
    mu_R = table[:, inv[len(r):]]
    zero = np.argwhere(mu_r <= 0)
    if len(zero):
        a, p = zero[0]
        raise DegenerateInputError(
            f"ball B(x={int(centers[a])}, r={r[p]:.6g}) has zero mass"
        )
    return Sweep(centers=centers, r=r, R=R, values=np.log(mu_R / mu_r), mu_r=mu_r, mu_R=mu_R)


# -- reductions ------------------------------------------------------------

def l1_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Slope of the least-absolute-deviation line through (x, y).

    Some optimal line passes through two data points, so the candidates are
    enumerated; ties go to the smaller slope.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i, j = np.triu_indices(len(x), 1)
    keep = x[j] != x[i]
    i, j = i[keep], j[keep]
    b = (y[j] - y[i]) / (x[j] - x[i])
    a = y[i] - b * x[i]
    cost = np.abs(y[None, :] - a[:, None] - b[:, None] * x[None, :]).sum(axis=1)
    best = cost.min()
    return float(b[cost <= best + 1e-12 * max(1.0, best)].min())


def reduce_sweep(sweep: Sweep, mode: str, reduction: str = "envelope") -> DimEstimate:
    upper = _UPPER[mode]
    ell = sweep.log_ratio
    vals = sweep.values
    nc, npairs = vals.shape
    if reduction == "extreme":
        ratio = vals / ell[None, :]
        flat = np.argmax(ratio) if upper else np.argmin(ratio)
        a, p = np.unravel_index(flat, ratio.shape)
        s = max(float(ratio[a, p]), 0.0)
        const = 1.0
    else:
        keys = np.round(ell, 9)
        levels = np.unique(keys)
        env = np.empty(len(levels))
        for i, key in enumerate(levels):
            block = vals[:, keys == key]
            env[i] = block.max() if upper else block.min()
        if len(levels) == 0:
            raise ResolutionError("sweep has no ratio levels")
        if len(levels) >= 2:
            s = l1_slope(levels, env)
        else:
            s = float(env[0] / levels[0])
        s = max(s, 0.0)
        # constant: the extreme of exp(value - s * ell), attained at the witness
        resid = vals - s * ell[None, :]
        flat = np.argmax(resid) if upper else np.argmin(resid)
        a, p = np.unravel_index(flat, resid.shape)
        const = float(np.exp(resid[a, p]))
    return DimEstimate(
        exponent=s,
        constant=const,
        witness=(int(sweep.centers[a]), float(sweep.r[p]), float(sweep.R[p])),
        mode=mode,
        reduction=reduction,
        n_pairs=npairs,
        n_centers=nc,
        sweep=sweep,
    )


def _norm_mode(mode: str) -> str:
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}")
    return mode


def assouad_estimate(space: FiniteMetricSpace, config: Optional[SweepConfig] = None) -> DimEstimate:
    """Upper exponent of packing counts N(B(x, R), r) (separation r)."""
    config = config or SweepConfig()
    return reduce_sweep(count_sweep(space, config, 1.0), "assouad", config.reduction)


def lower_estimate(space: FiniteMetricSpace, config: Optional[SweepConfig] = None) -> DimEstimate:
    """Lower exponent of packing counts at separation 2r (a covering lower bound)."""
    config = config or SweepConfig()
    return reduce_sweep(count_sweep(space, config, 2.0), "lower", config.reduction)


def upper_reg_estimate(measure, config: Optional[SweepConfig] = None) -> DimEstimate:
    config = config or SweepConfig()
    return reduce_sweep(mass_sweep(measure, config), "upper_reg", config.reduction)


def lower_reg_estimate(measure, config: Optional[SweepConfig] = None) -> DimEstimate:
    config = config or SweepConfig()
    return reduce_sweep(mass_sweep(measure, config), "lower_reg", config.reduction)


def estimate(obj, mode: str, config: Optional[SweepConfig] = None) -> DimEstimate:
    mode = _norm_mode(mode)
    fn = {
        "assouad": assouad_estimate,
        "lower": lower_estimate,
        "upper_reg": upper_reg_estimate,
        "lower_reg": lower_reg_estimate,
    }[mode]
    return fn(obj, config)
