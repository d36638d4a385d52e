"""Classify a Mach sweep at fixed boundary velocity and report profile residuals."""

import argparse
from dataclasses import replace

from micropolar.model import params_for_mach
from micropolar.stationary import Regime, build_profile, classify, ode_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--u-b", type=float, default=-1.1)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--mach", type=float, nargs="+", default=[0.8, 0.95, 1.0, 1.05, 1.5, 2.0])
    args = ap.parse_args()

    print(f"{'M_+':>6} {'chi0':>8} {'regime':>12} {'L':>10} {'residual':>10}")
    for mach in args.mach:
        p = replace(params_for_mach(mach, chi0=1.0), u_b=args.u_b)
        prob = classify(p)
        if prob.regime is Regime.NONEXISTENT:
            print(f"{mach:6.3f} {p.u_b / p.u_plus:8.4f} {prob.regime.value:>12} {'-':>10} {'-':>10}")
            continue
        prof = build_profile(p, n=args.n)
        print(f"{mach:6.3f} {prof.chi0:8.4f} {prob.regime.value:>12} {prof.grid.L:10.3f} {ode_residual(prof):10.2e}")


if __name__ == "__main__":
    main()
