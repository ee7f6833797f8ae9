"""Build the plain and doubling mass distributions on a Cantor net and report them."""
import argparse
import math
import warnings

from fraclab.experiments import cantor_net, run_mass
from fraclab.mass_builder import choose_rho

warnings.filterwarnings("ignore", module="numba")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--level", type=int, default=14)
    ap.add_argument("--t", type=float, default=0.4)
    ap.add_argument("--depth", type=int, default=2)
    args = ap.parse_args()
    s = math.log(2) / math.log(3)
    rho = choose_rho(s, args.t)
    sp = cantor_net(args.level)
    print(f"{sp.n} points, rho = 2^{math.log2(rho):.0f}, depth {args.depth}")
    for doubling in (False, True):
        rep = run_mass(sp, args.t, s, rho=rho, depth=args.depth, doubling=doubling)
        print(f"\n{rep.name}: {rep.verdict}")
        for c in rep.checks:
            print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        if doubling:
            for b in rep.measured["doubling_bands"]:
                print(f"    r in ({b['r_lo']:.3g}, {b['r_hi']:.3g}]: sup ratio {b['sup_ratio']:.3g}")


if __name__ == "__main__":
    main()
