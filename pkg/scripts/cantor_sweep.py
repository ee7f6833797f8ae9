"""Assouad and lower estimates of Cantor nets at increasing resolution.

Dumps each sweep as CSV so the envelope can be plotted offline.
"""
import argparse
import math
import warnings
from pathlib import Path

from fraclab.dim_est import SweepConfig, assouad_estimate, lower_estimate
from fraclab.experiments import cantor_net

warnings.filterwarnings("ignore", module="numba")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[8, 9, 10])
    ap.add_argument("--reduction", choices=["envelope", "extreme"], default="envelope")
    ap.add_argument("--csv-dir", default=None)
    args = ap.parse_args()
    cfg = SweepConfig(reduction=args.reduction)
    target = math.log(2) / math.log(3)
    print(f"target {target:.4f}")
    print("level  points  assouad  lower")
    for k in args.levels:
        sp = cantor_net(k)
        a = assouad_estimate(sp, cfg)
        lo = lower_estimate(sp, cfg)
        print(f"{k:5d}  {sp.n:6d}  {a.exponent:.4f}   {lo.exponent:.4f}")
        if args.csv_dir:
            d = Path(args.csv_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"cantor{k}_assouad.csv").write_text(a.sweep.to_csv())
            (d / f"cantor{k}_lower.csv").write_text(lo.sweep.to_csv())


if __name__ == "__main__":
    main()
