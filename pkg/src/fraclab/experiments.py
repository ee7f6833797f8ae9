"""Reproducible experiments on self-similar and inhomogeneous self-similar sets.

Each ``run_*`` function returns an :class:`ExperimentReport` whose verdict
can be recomputed from the echoed inputs and checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import jsonio
from .cube_tree import build_cube_tree
from .dim_est import (
    SweepConfig,
    WeightedSpace,
    assouad_estimate,
    ball_mass_table,
    lower_estimate,
    lower_reg_estimate,
    sample_centers,
    upper_reg_estimate,
)
from .errors import InputError, PreconditionError
from .ifs import (
    IfsSystem,
    attractor_points,
    check_cosc,
    compose,
    inhomogeneous_cloud,
    similarity_dimension,
    stopping_words,
)
from .mass_builder import MassParams, build_mass, build_mass_doubling, choose_rho
from .metric_space import FiniteMetricSpace

DEFAULT_DELTA = 3.0 ** -8
DEFAULT_TOL = 0.1
ONE_SIDED_TOL = 0.05


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_json_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    predicted: dict
    measured: dict
    tolerance: dict
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if all(c.passed for c in self.checks) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": self.inputs,
            "predicted": self.predicted,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "checks": [c.to_json_dict() for c in self.checks],
            "notes": list(self.notes),
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return jsonio.dumps(self.to_json_dict())


def markdown_summary(reports) -> str:
    lines = [
        "| experiment | predicted | measured | tolerance | verdict |",
        "|---|---|---|---|---|",
    ]

    def fmt(d):
        return ", ".join(f"{k}={_short(v)}" for k, v in d.items() if not isinstance(v, (dict, list)))

    for r in reports:
        lines.append(f"| {r.name} | {fmt(r.predicted)} | {fmt(r.measured)} | {fmt(r.tolerance)} | {r.verdict} |")
    return "\n".join(lines) + "\n"


def _short(v):
    if isinstance(v, float):
        return format(v, ".4g")
    return str(v)


# -- helpers -----------------------------------------------------------------

def _condensation_space(ifs: IfsSystem, delta: float) -> Optional[FiniteMetricSpace]:
    pts = ifs.condensation.cloud(delta)
    if len(pts) < 2:
        return None
    return FiniteMetricSpace.from_points(pts, resolution_floor=delta)


def _finite_set_estimate(space, estimator, config):
    """Estimates on C; a single point has dimension 0."""
    if space is None:
        return 0.0, None
    est = estimator(space, config)
    return est.exponent, est.to_json_dict()


def _require_cosc(ifs: IfsSystem, force: bool, notes: list) -> dict:
    report = check_cosc(ifs)
    if not report["cosc"]:
        if not force:
            raise PreconditionError("the condensation open set condition fails", report)
        notes.append("COSC fails; run forced, so only the always-valid one-sided inequality is a verdict")
    return report


def _echo(ifs, delta, config, **extra):
    out = {"ifs": ifs.to_json_dict(), "delta": delta, "sweep": config.to_json_dict()}
    out.update(extra)
    return out


# -- theorem checks on inhomogeneous attractors --------------------------------

def run_thm41(ifs: IfsSystem, delta: float = DEFAULT_DELTA, config: Optional[SweepConfig] = None,
              tol: float = DEFAULT_TOL, one_sided_tol: float = ONE_SIDED_TOL, force: bool = False) -> ExperimentReport:
    """Assouad dimension of E_C against max(dim_A E, dim_A C)."""
    config = config or SweepConfig()
    if ifs.condensation is None:
        raise InputError("the experiment needs a condensation set")
    notes = []
    cosc = _require_cosc(ifs, force, notes)
    s = similarity_dimension(ifs)
    ec = inhomogeneous_cloud(ifs, delta).space
    est_ec = assouad_estimate(ec, config)
    dim_c, est_c = _finite_set_estimate(_condensation_space(ifs, delta), assouad_estimate, config)
    predicted = max(s, dim_c)
    measured = est_ec.exponent
    checks = [Check("one_sided", measured >= predicted - one_sided_tol,
                    f"{measured:.4f} >= {predicted:.4f} - {one_sided_tol}")]
    formula = abs(measured - predicted) <= tol
    if cosc["cosc"]:
        checks.insert(0, Check("formula", formula, f"|{measured:.4f} - {predicted:.4f}| <= {tol}"))
    else:
        notes.append(f"formula {'holds' if formula else 'fails'}: measured {measured:.4f} vs max {predicted:.4f}")
    return ExperimentReport(
        name="thm41",
        inputs=_echo(ifs, delta, config, force=force, n_points=ec.n),
        predicted={"assouad_E_C": predicted, "similarity_dimension": s, "assouad_C": dim_c},
        measured={"assouad_E_C": measured, "estimate_E_C": est_ec.to_json_dict(), "estimate_C": est_c,
                  "cosc": cosc["cosc"], "cosc_margin": cosc["condensation_margin"],
                  "formula_holds": formula},
        tolerance={"abs": tol, "one_sided": one_sided_tol},
        checks=checks,
        notes=notes,
    )


def run_thm42(ifs: IfsSystem, delta: float = DEFAULT_DELTA, config: Optional[SweepConfig] = None,
              tol: float = DEFAULT_TOL, one_sided_tol: Optional[float] = None, force: bool = False) -> ExperimentReport:
    """Lower dimension of E_C against that of C."""
    config = config or SweepConfig()
    one_sided_tol = tol if one_sided_tol is None else one_sided_tol
    if ifs.condensation is None:
        raise InputError("the experiment needs a condensation set")
    notes = []
    cosc = _require_cosc(ifs, force, notes)
    ec = inhomogeneous_cloud(ifs, delta).space
    est_ec = lower_estimate(ec, config)
    dim_c, est_c = _finite_set_estimate(_condensation_space(ifs, delta), lower_estimate, config)
    measured = est_ec.exponent
    checks = [Check("one_sided", measured >= dim_c - one_sided_tol, f"{measured:.4f} >= {dim_c:.4f} - {one_sided_tol}")]
    formula = abs(measured - dim_c) <= tol
    if cosc["cosc"]:
        checks.insert(0, Check("formula", formula, f"|{measured:.4f} - {dim_c:.4f}| <= {tol}"))
    else:
        notes.append(f"formula {'holds' if formula else 'fails'}: measured {measured:.4f} vs lower(C) {dim_c:.4f}")
    return ExperimentReport(
        name="thm42",
        inputs=_echo(ifs, delta, config, force=force, n_points=ec.n),
        predicted={"lower_E_C": dim_c, "lower_C": dim_c},
        measured={"lower_E_C": measured, "estimate_E_C": est_ec.to_json_dict(), "estimate_C": est_c,
                  "cosc": cosc["cosc"], "formula_holds": formula},
        tolerance={"abs": tol, "one_sided": one_sided_tol},
        checks=checks,
        notes=notes,
    )


# -- descent mechanism for word measures ---------------------------------------

def word_measure(ifs: IfsSystem, q: float, n_max: int):
    """Discrete measure with mu(phi_w E_C) = q^|w| on the cylinder hierarchy.

    Atoms phi_w(c) (c the condensation points, |w| < n_max) carry the
    remainder q^|w| (1 - kappa q), split evenly over the points of C; every
    word of length n_max lumps its q^n_max on the attractor point phi_w(z0).
    """
    kappa = ifs.kappa
    if not 0 < q <= 1.0 / kappa:
        raise InputError(f"q must lie in (0, 1/kappa] = (0, {1.0 / kappa:g}]")
    C = np.asarray(ifs.condensation.params.get("points") if ifs.condensation.kind == "points" else ifs.condensation.cloud(1e-3))
    z0 = ifs.maps[0].fixed_point()
    pts, w = [], []
    level = [((), 1.0)]
    for n in range(n_max):
        nxt = []
        for word, _ in level:
            f = compose(ifs, word)
            atom = q ** n * (1.0 - kappa * q) / len(C)
            for c in C:
                pts.append(f(c))
                w.append(atom)
            for i in range(1, kappa + 1):
                nxt.append((word + (i,), 0.0))
        level = nxt
    for word, _ in level:
        pts.append(compose(ifs, word)(z0))
        w.append(q ** n_max)
    pts = np.asarray(pts, dtype=float)
    w = np.asarray(w)
    keep = w > 0  # q = 1/kappa leaves the condensation atoms empty
    pts, w = pts[keep], w[keep]
    order = np.lexsort(pts.T[::-1])
    pts, w = pts[order], w[order]
    floor = float(np.min(ifs.ratios)) ** n_max * _span(pts)
    space = FiniteMetricSpace.from_points(pts, resolution_floor=floor)
    return WeightedSpace(space, w)


def _span(pts):
    return float(np.max(np.ptp(pts, axis=0)))


def run_vk_descent(ifs: IfsSystem, q: float = 0.4, n_max: int = 10, lam: Optional[float] = None,
                   config: Optional[SweepConfig] = None, margin: float = 0.1) -> ExperimentReport:
    """Greedy descent along cylinders for the word measure with parameter q.

    The descent constant is max over steps of
    min_j mu(phi_{wj} E_C) / mu(phi_w E_C) * (Lip phi_{wj} / Lip phi_w)^(-lam),
    which for these measures is min_j q * Lip(phi_j)^(-lam).
    """
    config = config or SweepConfig()
    if ifs.condensation is None:
        raise InputError("the experiment needs a condensation set")
    s = similarity_dimension(ifs)
    lam = s if lam is None else float(lam)
    notes = ["checks the descent inequality for the supplied word measure only, not for all measures"]
    c_space = _condensation_space(ifs, 3.0 ** -8)
    dim_c = 0.0 if c_space is None else assouad_estimate(c_space, config).exponent
    if dim_c >= s:
        raise PreconditionError(f"dim_A(C) estimate {dim_c:.4f} is not below the similarity dimension {s:.4f}")

    ratios = ifs.ratios
    word = ()
    steps = []
    seq = []
    cosc = check_cosc(ifs) if ifs.open_set is not None else None
    rho_hat = 0.5 * cosc["condensation_margin"] if cosc and cosc["condensation_margin"] else 0.0
    mu = word_measure(ifs, q, n_max)
    space, _, weights = mu.mass_view()
    z = np.asarray(ifs.condensation.cloud(1e-3))[0]
    for n in range(n_max):
        vals = q * ratios ** (-lam)
        j = int(np.argmin(vals))  # ties to the smallest letter
        steps.append(float(vals[j]))
        f = compose(ifs, word)
        if rho_hat > 0:
            x = f(z)
            center = int(np.argmin(((space.points - x) ** 2).sum(axis=1)))
            m = ball_mass_table(space, np.arange(space.n), weights, np.array([center]), np.array([rho_hat * f.ratio]))[0, 0]
            seq.append(float(m * f.ratio ** (-lam)))
        word = word + (j + 1,)
    C0 = max(steps)
    normalized = [v / seq[0] for v in seq] if seq and seq[0] > 0 else []
    predicted_rate = C0
    decay_ok = bool(normalized) and all(
        abs(v / predicted_rate ** n - 1) <= 0.01 for n, v in enumerate(normalized)
    )
    est = upper_reg_estimate(mu, config)
    checks = [
        Check("descent_constant", C0 < 1, f"C0 = {C0:.6f} < 1"),
        Check("geometric_decay", decay_ok, f"ball masses decay like C0^n within 1%"),
        Check("upper_regularity", est.exponent >= s + margin, f"{est.exponent:.4f} >= {s:.4f} + {margin}"),
    ]
    if C0 >= 1:
        notes.append("boundary case: q * Lip^(-lam) >= 1, no strict descent")
    return ExperimentReport(
        name="vk",
        inputs={"ifs": ifs.to_json_dict(), "q": q, "n_max": n_max, "lambda": lam, "sweep": config.to_json_dict()},
        predicted={"C0": float(np.min(q * ratios ** (-lam))), "similarity_dimension": s,
                   "upper_reg_lower_bound": s + margin},
        measured={"C0": C0, "steps": steps, "decay_sequence": seq, "decay_normalized": normalized,
                  "upper_reg": est.exponent, "estimate": est.to_json_dict(), "assouad_C": dim_c},
        tolerance={"decay_rel": 0.01, "margin": margin},
        checks=checks,
        notes=notes,
    )


# -- s-regular measure on E_C --------------------------------------------------

def hausdorff_weights(ifs: IfsSystem, delta: float):
    """Discrete H^s on E_C: copy points weighted by (Lip(phi_w) * spacing of C)^s."""
    cond = ifs.condensation
    s = cond.s_regular
    lc = inhomogeneous_cloud(ifs, delta)
    w = np.zeros(lc.space.n)
    ratio_of = {}
    for i in np.flatnonzero(lc.kind == 1):
        wid = int(lc.word_id[i])
        if wid not in ratio_of:
            word = lc.words[wid]
            lip = float(np.prod(ifs.ratios[np.asarray(word, dtype=int) - 1])) if word else 1.0
            base = cond.cloud(delta / lip)
            spacing = _mean_spacing(base, cond)
            ratio_of[wid] = (lip * spacing) ** s
        w[i] = ratio_of[wid]
    return lc, WeightedSpace(lc.space, w)


def _mean_spacing(base, cond):
    if cond.kind == "interval":
        return (cond.params["hi"] - cond.params["lo"]) / max(len(base) - 1, 1)
    if len(base) < 2:
        return 1.0
    return float(np.median(np.sqrt((np.diff(base, axis=0) ** 2).sum(axis=1))))


def run_regularity(ifs: IfsSystem, delta: float = DEFAULT_DELTA, config: Optional[SweepConfig] = None,
                   spread_max: float = 50.0, min_exponent: float = 0.9) -> ExperimentReport:
    config = config or SweepConfig()
    cond = ifs.condensation
    if cond is None or cond.s_regular is None:
        raise PreconditionError("the condensation set carries no s-regularity tag")
    s = float(cond.s_regular)
    sim = similarity_dimension(ifs)
    if sim >= s:
        raise PreconditionError(f"similarity dimension {sim:.4f} is not below s = {s}")
    lc, mu = hausdorff_weights(ifs, delta)
    space = lc.space
    est = lower_reg_estimate(mu, config)
    # two-sided s-regularity over the sweep radii
    radii = np.unique(est.sweep.r)
    centers = sample_centers(space.n, config)
    table = ball_mass_table(space, np.arange(space.n), mu.weights, centers, radii)
    dens = table / radii[None, :] ** s
    c_lo, c_hi = float(dens.min()), float(dens.max())
    spread = c_hi / c_lo if c_lo > 0 else math.inf
    checks = [
        Check("regularity_spread", spread < spread_max, f"C/c = {spread:.3f} < {spread_max}"),
        Check("lower_regularity", est.exponent >= min_exponent, f"{est.exponent:.4f} >= {min_exponent}"),
    ]
    return ExperimentReport(
        name="regularity",
        inputs=_echo(ifs, delta, config, s=s, n_points=space.n),
        predicted={"lower_reg": s, "s": s},
        measured={"lower_reg": est.exponent, "spread": spread, "c": c_lo, "C": c_hi,
                  "estimate": est.to_json_dict()},
        tolerance={"spread_max": spread_max, "min_exponent": min_exponent},
        checks=checks,
    )


# -- mass constructions on a cube tree ---------------------------------------

def cantor_net(level: int) -> FiniteMetricSpace:
    from .ifs import cantor_system

    return attractor_points(cantor_system(), 3.0 ** -level)


def _deepest(space, rho):
    return max(0, int(math.floor(math.log(space.resolution_floor / space.diam) / math.log(rho) + 1e-9)))


def run_mass(space: FiniteMetricSpace, t: float, s: float, c0: float = 1.0, rho: Optional[float] = None,
             depth: Optional[int] = None, doubling: bool = False, config: Optional[SweepConfig] = None,
             slack: float = 0.05, doubling_max: float = 1e4) -> ExperimentReport:
    """Build the measure (plain or doubling) and test its regularity over a sweep."""
    config = config or SweepConfig()
    rho = choose_rho(s, t, c0) if rho is None else rho
    depth = _deepest(space, rho) if depth is None else depth
    tree = build_cube_tree(space, rho, depth)
    params = MassParams(t=t, s=s, c0=c0)
    mass = (build_mass_doubling if doubling else build_mass)(tree, params)
    edge = mass.check()
    est = lower_reg_estimate(mass, config)
    checks = [
        Check("conservation", edge["conservation"], f"max rel error {edge['conservation_max_rel_error']:.2e}"),
        Check("decay_bound", edge["decay_bound"], f"max child/parent {edge['max_child_ratio']:.6g} <= rho^t {edge['rho_t']:.6g}"),
        Check("lower_regularity", est.exponent >= t - slack, f"{est.exponent:.4f} >= {t} - {slack}"),
    ]
    measured = {"lower_reg": est.exponent, "estimate": est.to_json_dict(), "edges": edge,
                "K": mass.K, "depth": depth, "cubes_per_level": [tree.n_cubes(k) for k in tree.levels]}
    if doubling:
        checks.insert(2, Check("floor_bound", edge["floor_bound"], f"min child/parent {edge['min_child_ratio']:.6g} >= eps {edge['eps']:.6g}"))
        bands = doubling_profile(mass, config)
        sups = [b["sup_ratio"] for b in bands]
        overall = max(sups)
        variation = max(sups) / min(sups)
        checks.append(Check("doubling_bound", overall < doubling_max, f"sup mu(2B)/mu(B) = {overall:.4g} < {doubling_max:g}"))
        checks.append(Check("doubling_stable", variation < 10, f"band sup max/min = {variation:.3f} < 10"))
        measured.update({"doubling_bands": bands, "doubling_sup": overall, "doubling_variation": variation})
    else:
        measured["reverse_doubling"] = reverse_doubling(mass, config)
    return ExperimentReport(
        name="thm33" if doubling else "thm32",
        inputs={"n_points": space.n, "t": t, "s": s, "c0": c0, "rho": rho, "depth": depth,
                "doubling": doubling, "sweep": config.to_json_dict()},
        predicted={"lower_reg_min": t - slack, "rho_t": rho ** t},
        measured=measured,
        tolerance={"slack": slack, "doubling_max": doubling_max},
        checks=checks,
    )


def doubling_profile(mass, config: SweepConfig, factor: float = 2.0, per_band: int = 4) -> list:
    """sup of mu(B(x, factor r)) / mu(B(x, r)) over each dyadic band (r_lo, 2 r_lo] of radii.

    Each band is sampled at ``per_band`` geometrically spaced radii.
    """
    space, labels, weights = mass.mass_view()
    tree = mass.tree
    rmin = max(config.guard * space.resolution_floor, tree.radius(tree.depth))
    top = space.diam / factor
    n_bands = int(math.floor(math.log2(top / rmin) + 1e-9))
    if n_bands < 1:
        return []
    j = np.arange(n_bands * per_band)
    radii = top * 2.0 ** (-j / per_band)
    centers = sample_centers(space.n, config)
    small = ball_mass_table(space, labels, weights, centers, radii)
    big = ball_mass_table(space, labels, weights, centers, factor * radii)
    sup = (big / small).max(axis=0).reshape(n_bands, per_band).max(axis=1)
    bands = [{"r_hi": float(top * 2.0 ** -b), "r_lo": float(top * 2.0 ** -(b + 1)), "sup_ratio": float(sup[b])}
             for b in range(n_bands)]
    return bands[::-1]


def reverse_doubling(mass, config: SweepConfig) -> dict:
    """min over the sweep of mu(B(x, r/rho)) / mu(B(x, r)) where r/rho stays below diam."""
    space, labels, weights = mass.mass_view()
    tree = mass.tree
    tau = 1.0 / tree.rho
    rmin = max(config.guard * space.resolution_floor, tree.radius(tree.depth))
    radii = []
    r = space.diam / tau
    while r >= rmin:
        radii.append(r)
        r /= 2.0
    if not radii:
        return {"tau": tau, "min_ratio": None}
    radii = np.array(radii)
    centers = sample_centers(space.n, config)
    small = ball_mass_table(space, labels, weights, centers, radii)
    big = ball_mass_table(space, labels, weights, centers, tau * radii)
    return {"tau": tau, "min_ratio": float((big / small).min())}


# -- bundled configurations ----------------------------------------------------

def config_dir():
    return resources.files("fraclab") / "configs"


def resolve_config(path) -> Path:
    """A config path, falling back to the bundled directory by file name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = config_dir() / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise InputError(f"config {path} not found (also not among the bundled configs)")


def load_config(path) -> dict:
    p = resolve_config(path)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _sweep_from(cfg: dict, seed: Optional[int]) -> SweepConfig:
    sweep = dict(cfg.get("sweep") or {})
    if seed is not None:
        sweep["seed"] = seed
    return SweepConfig.from_json_dict(sweep)


def run_from_config(name: str, cfg: dict, force: bool = False, seed: Optional[int] = None) -> ExperimentReport:
    ifs = IfsSystem.from_json_dict(cfg)
    config = _sweep_from(cfg, seed)
    delta = float(cfg.get("delta", DEFAULT_DELTA))
    tol = float(cfg.get("tolerance", DEFAULT_TOL))
    force = force or bool(cfg.get("force", False))
    if name == "thm41":
        return run_thm41(ifs, delta, config, tol=tol, force=force)
    if name == "thm42":
        return run_thm42(ifs, delta, config, tol=tol, force=force)
    if name == "vk":
        return run_vk_descent(ifs, q=float(cfg.get("q", 0.4)), n_max=int(cfg.get("n_max", 10)), config=config)
    if name == "regularity":
        return run_regularity(ifs, delta, config)
    raise InputError(f"unknown experiment {name!r}")


SUITE = [
    ("thm41", "cantor_interval.json", False),
    ("thm41", "cantor_point.json", False),
    ("thm41", "cantor_sequence.json", True),
    ("thm42", "cantor_interval.json", False),
    ("thm42", "cantor_point.json", False),
    ("thm42", "cantor_overlap.json", True),
    ("vk", "cantor_point.json", False),
    ("regularity", "cantor_regularity.json", False),
]


def run_suite(seed: Optional[int] = None) -> list:
    out = []
    for name, fname, force in SUITE:
        rep = run_from_config(name, load_config(config_dir() / fname), force=force, seed=seed)
        rep.inputs["config"] = fname
        out.append(rep)
    return out
