"""Command-line front end.

    fraclab generate --ifs cantor.json --delta 3e-4 --out e.json
    fraclab cubes --space e.json --rho 0.1 --depth 3
    fraclab build-measure --space e.json --t 0.4 [--s S] [--doubling] --out w.json --csv w.csv
    fraclab estimate --space e.json --mode assouad [--weights w.json] --out est.json --csv sweep.csv
    fraclab cosc --ifs system.json
    fraclab reproduce thm41 [--config cantor_interval.json] [--out-dir reports]

Exit codes: 0 success, 1 error (JSON on stderr), 2 a reproduced verdict failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import CapacityError, FraclabError, InputError, ResolutionError

EXPERIMENTS = ("thm41", "thm42", "vk", "regularity")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of printing usage and exiting."""

    def error(self, message):
        raise InputError(message)


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_space(path):
    from .metric_space import FiniteMetricSpace

    return FiniteMetricSpace.from_json_dict(_read_json(path))


def _load_ifs(path):
    from .ifs import IfsSystem

    return IfsSystem.from_json_dict(_read_json(path))


def _sweep_config(args):
    from .dim_est import SweepConfig

    kw = {"seed": args.seed}
    if getattr(args, "centers", None) is not None:
        kw["centers"] = "all" if args.centers == "all" else int(args.centers)
    return SweepConfig(**kw)


def _set_jobs(jobs):
    env = os.environ.get("FRACLAB_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise InputError(f"FRACLAB_JOBS={env!r} is not an integer") from None
    if jobs is None:
        return
    if jobs < 1:
        raise InputError("--jobs must be >= 1")
    import numba

    numba.set_num_threads(min(jobs, numba.config.NUMBA_NUM_THREADS))


# -- subcommands -------------------------------------------------------------

def cmd_generate(args):
    from .ifs import attractor_cloud, inhomogeneous_cloud

    ifs = _load_ifs(args.ifs)
    if ifs.condensation is not None and not args.homogeneous:
        lc = inhomogeneous_cloud(ifs, args.delta)
    else:
        lc = attractor_cloud(ifs, args.delta)
    out = lc.space.to_json_dict()
    out["kind"] = np.asarray(lc.kind).tolist()
    _emit(jsonio.dumps(out), args.out)
    return 0


def cmd_cubes(args):
    from .cube_tree import build_cube_tree, verify_tree

    space = _load_space(args.space)
    tree = build_cube_tree(space, args.rho, args.depth)
    if args.tree:
        Path(args.tree).write_text(jsonio.dumps(tree.to_json_dict(), indent=None))
    _emit(jsonio.dumps(verify_tree(tree)), args.out)
    return 0


def cmd_build_measure(args):
    from .cube_tree import build_cube_tree
    from .dim_est import lower_estimate, lower_reg_estimate
    from .experiments import _deepest
    from .mass_builder import MassParams, build_mass, build_mass_doubling, choose_rho

    space = _load_space(args.space)
    config = _sweep_config(args)
    s = args.s
    if s is None:
        s = lower_estimate(space, config).exponent
        if not args.t < s:
            raise CapacityError(
                f"t = {args.t} is not below the estimated lower dimension {s:.4f}",
                needed=args.t, available=s,
            )
    rho = args.rho if args.rho is not None else choose_rho(s, args.t, args.c0)
    depth = args.depth if args.depth is not None else _deepest(space, rho)
    if depth < 1:
        raise ResolutionError(f"rho = {rho:.4g} leaves no cube level above the resolution floor")
    tree = build_cube_tree(space, rho, depth)
    params = MassParams(t=args.t, s=s, c0=args.c0, M=args.M)
    mass = (build_mass_doubling if args.doubling else build_mass)(tree, params)
    est = lower_reg_estimate(mass, config)
    out = mass.to_json_dict()
    out["check"] = mass.check()
    out["lower_reg"] = est.to_json_dict()
    _emit(jsonio.dumps(out, indent=None), args.out)
    if args.csv:
        Path(args.csv).write_text(est.sweep.to_csv())
    return 0


def _load_measure(space, path):
    from .dim_est import LabeledMass, WeightedSpace

    obj = _read_json(path)
    if "finest_labels" in obj and "levels" in obj:
        return LabeledMass(space, obj["finest_labels"], obj["levels"][-1]["weights"])
    if "weights" in obj:
        return WeightedSpace(space, np.asarray(obj["weights"], dtype=float))
    raise InputError(f"{path}: expected a build-measure output or a 'weights' list")


def cmd_estimate(args):
    from .dim_est import MODE_ALIASES, estimate

    mode = MODE_ALIASES.get(args.mode, args.mode)
    space = _load_space(args.space)
    config = _sweep_config(args)
    if mode in ("upper_reg", "lower_reg"):
        if not args.weights:
            raise InputError(f"mode {args.mode} needs --weights")
        obj = _load_measure(space, args.weights)
    else:
        obj = space
    est = estimate(obj, mode, config)
    _emit(jsonio.dumps(est.to_json_dict()), args.out)
    if args.csv:
        Path(args.csv).write_text(est.sweep.to_csv())
    return 0


def cmd_cosc(args):
    from .ifs import check_cosc

    ifs = _load_ifs(args.ifs)
    _emit(jsonio.dumps(check_cosc(ifs, resolution=args.resolution, seed=args.seed)), args.out)
    return 0


def cmd_reproduce(args):
    from .experiments import SUITE, config_dir, load_config, markdown_summary, run_from_config

    names = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    jobs = []
    for name in names:
        if args.config:
            jobs.append((name, args.config, args.force))
        else:
            jobs.extend((n, str(config_dir() / f), force or args.force) for n, f, force in SUITE if n == name)
    reports = []
    for name, path, force in jobs:
        rep = run_from_config(name, load_config(path), force=force, seed=args.seed)
        rep.inputs["config"] = Path(path).name
        reports.append(rep)
    summary = markdown_summary(reports)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, rep in enumerate(reports):
            stem = Path(rep.inputs["config"]).stem
            (out / f"{i:02d}_{rep.name}_{stem}.json").write_text(rep.to_json())
        (out / "summary.md").write_text(summary)
    else:
        for rep in reports:
            sys.stdout.write(rep.to_json())
    sys.stdout.write(summary)
    return 0 if all(r.passed for r in reports) else 2


# -- parser ------------------------------------------------------------------

def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fraclab", description="Fractal dimensions of finite metric spaces and self-similar sets.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None, help="worker threads (FRACLAB_JOBS overrides)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="point cloud of an attractor")
    g.add_argument("--ifs", required=True)
    g.add_argument("--delta", type=_positive, required=True)
    g.add_argument("--homogeneous", action="store_true", help="ignore the condensation set")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cubes", help="cube decomposition and its property report")
    c.add_argument("--space", required=True)
    c.add_argument("--rho", type=_positive, required=True)
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--tree", help="also write the tree JSON here")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cubes)

    b = sub.add_parser("build-measure", help="mass distribution with lower regularity >= t")
    b.add_argument("--space", required=True)
    b.add_argument("--t", type=_positive, required=True)
    b.add_argument("--s", type=_positive, default=None, help="lower dimension of the space (estimated if omitted)")
    b.add_argument("--c0", type=_positive, default=1.0)
    b.add_argument("--rho", type=_positive, default=None)
    b.add_argument("--depth", type=int, default=None)
    b.add_argument("--M", type=int, default=None)
    b.add_argument("--doubling", action="store_true")
    b.add_argument("--centers", default=None)
    b.add_argument("--out")
    b.add_argument("--csv")
    b.set_defaults(func=cmd_build_measure)

    e = sub.add_parser("estimate", help="dimension estimate with witness")
    e.add_argument("--space", required=True)
    e.add_argument("--mode", required=True,
                   choices=["assouad", "lower", "uppereg", "lowreg", "upper_reg", "lower_reg"])
    e.add_argument("--weights")
    e.add_argument("--centers", default=None)
    e.add_argument("--out")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("cosc", help="open set and condensation open set checks")
    o.add_argument("--ifs", required=True)
    o.add_argument("--resolution", type=_positive, default=None)
    o.add_argument("--out")
    o.set_defaults(func=cmd_cosc)

    r = sub.add_parser("reproduce", help="rerun the bundled experiments")
    r.add_argument("experiment", choices=EXPERIMENTS + ("all",))
    r.add_argument("--config")
    r.add_argument("--force", action="store_true")
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", module="numba")
    try:
        args = build_parser().parse_args(argv)
        _set_jobs(args.jobs)
        return args.func(args)
    except FraclabError as exc:
        sys.stderr.write(jsonio.dumps(exc.to_dict()))
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(jsonio.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
