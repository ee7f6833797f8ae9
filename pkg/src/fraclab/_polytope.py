"""Small convex-polytope helpers (vertex representation) for the open-set checks."""

from __future__ import annotations

import itertools

import numpy as np

GEOM_TOL = 1e-12


def _hull(V: np.ndarray):
    from scipy.spatial import ConvexHull

    return ConvexHull(V)


def halfspaces(V: np.ndarray) -> np.ndarray:
    """Rows (a, b) with a.x + b <= 0 inside, |a| = 1."""
    if V.shape[1] == 1:
        lo, hi = V[:, 0].min(), V[:, 0].max()
        return np.array([[1.0, -hi], [-1.0, lo]])
    return _hull(V).equations


def depth_inside(V: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Signed distance of points x to the boundary of conv(V); positive inside."""
    H = halfspaces(V)
    x = np.atleast_2d(x)
    return -(x @ H[:, :-1].T + H[:, -1]).max(axis=1)


def _edges(V: np.ndarray) -> list:
    hull = _hull(V)
    out = set()
    for simplex in hull.simplices:
        for a, b in itertools.combinations(simplex, 2):
            out.add((min(a, b), max(a, b)))
    return [V[b] - V[a] for a, b in out]


def separation_gap(A: np.ndarray, B: np.ndarray) -> float:
    """Largest gap between the projections of conv(A) and conv(B) over candidate axes.

    A nonnegative value means the open polytopes are disjoint (separating axis
    theorem); zero means their closures touch.  Exact in dimensions 1 to 3.
    """
    d = A.shape[1]
    if d == 1:
        return float(max(B.min() - A.max(), A.min() - B.max()))
    axes = [h[:-1] for h in halfspaces(A)] + [h[:-1] for h in halfspaces(B)]
    if d == 3:
        for ea in _edges(A):
            for eb in _edges(B):
                ax = np.cross(ea, eb)
                nrm = np.linalg.norm(ax)
                if nrm > GEOM_TOL:
                    axes.append(ax / nrm)
    best = -np.inf
    for ax in axes:
        pa, pb = A @ ax, B @ ax
        best = max(best, pb.min() - pa.max(), pa.min() - pb.max())
    return float(best)


def sample_in(V: np.ndarray, m: int, rng) -> np.ndarray:
    w = rng.dirichlet(np.ones(len(V)), size=m)
    return w @ V


def distance_to_hull(V: np.ndarray, x: np.ndarray) -> float:
    """Euclidean distance from x to conv(V)."""
    x = np.asarray(x, dtype=float)
    if V.shape[1] == 1:
        lo, hi = V[:, 0].min(), V[:, 0].max()
        return float(max(lo - x[0], x[0] - hi, 0.0))
    if depth_inside(V, x)[0] >= 0:
        return 0.0
    from scipy.optimize import minimize

    k = len(V)
    res = minimize(
        lambda w: float(np.sum((w @ V - x) ** 2)),
        np.full(k, 1.0 / k),
        jac=lambda w: 2.0 * V @ (w @ V - x),
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0, "jac": lambda w: np.ones_like(w)}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return float(np.sqrt(max(res.fun, 0.0)))
