"""Stationarity floor of the plain and well-balanced schemes under grid refinement."""

import argparse

import numpy as np

from micropolar.analysis import sup_norm_perturbation
from micropolar.model import params_for_mach
from micropolar.solver import State, run
from micropolar.stationary import build_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mach", type=float, default=1.5)
    ap.add_argument("--chi0", type=float, default=0.9)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--n", type=int, nargs="+", default=[128, 256, 512, 1024])
    args = ap.parse_args()

    p = params_for_mach(args.mach, chi0=args.chi0, omega_b=0.05)
    print(f"{'n':>6} {'plain':>10} {'balanced':>10}")
    prev = None
    for n in args.n:
        prof = build_profile(p, n=n)
        floors = [
            sup_norm_perturbation(run(State.from_profile(prof), args.t_end, prof, p, well_balanced=wb).final, prof)
            for wb in (False, True)
        ]
        rate = "" if prev is None else f"  orders {np.log2(prev[0] / floors[0]):.2f} {np.log2(prev[1] / floors[1]):.2f}"
        print(f"{n:6d} {floors[0]:10.2e} {floors[1]:10.2e}{rate}")
        prev = floors


if __name__ == "__main__":
    main()
